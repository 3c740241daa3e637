// Copyright 2026 The vqphone Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "vqphone/phoneset.hpp"

namespace vqphone {

// Keep in sync with data/arpabet_ipa.tsv (checked by test_phoneset).
std::string_view bundled_mapping_text() {
  static constexpr std::string_view kText = R"TSV(# Copyright 2026 The vqphone Authors
# SPDX-License-Identifier: Apache-2.0
# ARPAbet -> IPA, version 1
# Stress-specific vowel variants (e.g. AH0) override the bare entry.
AA	ɑ
AE	æ
AH	ʌ
AH0	ə
AO	ɔ
AW	aʊ
AY	aɪ
EH	ɛ
ER	ɝ
ER0	ɚ
EY	eɪ
IH	ɪ
IY	i
OW	oʊ
OY	ɔɪ
UH	ʊ
UW	u
B	b
CH	tʃ
D	d
DH	ð
F	f
G	ɡ
HH	h
JH	dʒ
K	k
L	l
M	m
N	n
NG	ŋ
P	p
R	ɹ
S	s
SH	ʃ
T	t
TH	θ
V	v
W	w
Y	j
Z	z
ZH	ʒ
)TSV";
  return kText;
}

}  // namespace vqphone
