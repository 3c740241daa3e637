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

#pragma once

// ARPAbet (CMU pronouncing dictionary) parsing and ARPAbet -> IPA mapping.

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "vqphone/errors.hpp"

namespace vqphone {

// The 39-phone ARPAbet inventory used by the CMU dictionary.
const std::array<std::string_view, 39>& arpabet_inventory();
bool is_arpabet_phone(std::string_view symbol);
bool is_arpabet_vowel(std::string_view symbol);

struct ArpabetPhone {
  std::string symbol;
  std::optional<int> stress;  // 0, 1 or 2; vowels only

  bool operator==(const ArpabetPhone&) const = default;
};

class PhoneParseError : public Error {
 public:
  enum class Kind { EmptyInput, UnknownPhone, StressOnConsonant, BadStress };
  PhoneParseError(Kind kind, std::size_t token_index, const std::string& message)
      : Error(message), kind_(kind), token_index_(token_index) {}
  Kind kind() const { return kind_; }
  std::size_t token_index() const { return token_index_; }

 private:
  Kind kind_;
  std::size_t token_index_;
};

// Whitespace-separated phones, each optionally followed by a stress digit.
std::vector<ArpabetPhone> parse_arpabet(std::string_view line);
// Canonical text: single spaces, stress digit appended.
std::string format_arpabet(const std::vector<ArpabetPhone>& phones);

struct IpaTranscription {
  std::vector<std::string> symbols;
  // Symbols joined by single spaces.
  std::string to_string() const;
};

// Keys are bare phones ("AA") or stress-specific vowel variants ("AH0"). The
// variant wins when present. Primary and secondary stress are rendered as a
// mark prefixed to the vowel symbol.
class MappingTable {
 public:
  MappingTable() = default;
  explicit MappingTable(std::map<std::string, std::string> entries) : entries_(std::move(entries)) {}

  std::string lookup(const ArpabetPhone& phone) const;  // no stress mark
  const std::map<std::string, std::string>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }

  std::string primary_mark = "ˈ";
  std::string secondary_mark = "ˌ";

 private:
  std::map<std::string, std::string> entries_;
};

class MappingTableError : public Error {
 public:
  MappingTableError(std::size_t line, const std::string& message)
      : Error(line ? "line " + std::to_string(line) + ": " + message : message), line_(line) {}
  std::size_t line() const { return line_; }  // 0 for whole-table errors

 private:
  std::size_t line_;
};

// UTF-8 text, one "ARPABET<TAB>IPA" entry per line, '#' starts a comment.
// The result must cover every phone of the inventory.
MappingTable parse_mapping_table(std::string_view text);
MappingTable load_mapping_table(const std::filesystem::path& path);

// Text of the table shipped in data/arpabet_ipa.tsv.
std::string_view bundled_mapping_text();
const MappingTable& default_mapping_table();

IpaTranscription to_ipa(const std::vector<ArpabetPhone>& phones, const MappingTable& table);

}  // namespace vqphone
