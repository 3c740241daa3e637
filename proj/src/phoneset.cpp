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

#include <algorithm>
#include <fstream>
#include <iterator>
#include <set>
#include <sstream>

namespace vqphone {

namespace {

constexpr std::array<std::string_view, 39> kInventory = {
    "AA", "AE", "AH", "AO", "AW", "AY", "B",  "CH", "D", "DH", "EH", "ER", "EY",
    "F",  "G",  "HH", "IH", "IY", "JH", "K",  "L",  "M", "N",  "NG", "OW", "OY",
    "P",  "R",  "S",  "SH", "T",  "TH", "UH", "UW", "V", "W",  "Y",  "Z",  "ZH"};

constexpr std::array<std::string_view, 15> kVowels = {"AA", "AE", "AH", "AO", "AW", "AY", "EH", "ER",
                                                      "EY", "IH", "IY", "OW", "OY", "UH", "UW"};

std::vector<std::string_view> split_whitespace(std::string_view line) {
  std::vector<std::string_view> tokens;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    std::size_t j = i;
    while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
    if (j > i) tokens.push_back(line.substr(i, j - i));
    i = j;
  }
  return tokens;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

}  // namespace

const std::array<std::string_view, 39>& arpabet_inventory() { return kInventory; }

bool is_arpabet_phone(std::string_view symbol) {
  return std::find(kInventory.begin(), kInventory.end(), symbol) != kInventory.end();
}

bool is_arpabet_vowel(std::string_view symbol) {
  return std::find(kVowels.begin(), kVowels.end(), symbol) != kVowels.end();
}

std::vector<ArpabetPhone> parse_arpabet(std::string_view line) {
  using Kind = PhoneParseError::Kind;
  const auto tokens = split_whitespace(line);
  if (tokens.empty()) throw PhoneParseError(Kind::EmptyInput, 0, "empty ARPAbet input");
  std::vector<ArpabetPhone> phones;
  phones.reserve(tokens.size());
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    std::string_view tok = tokens[i];
    ArpabetPhone phone;
    if (std::isdigit(static_cast<unsigned char>(tok.back()))) {
      const int digit = tok.back() - '0';
      std::string_view base = tok.substr(0, tok.size() - 1);
      if (!is_arpabet_phone(base)) {
        throw PhoneParseError(Kind::UnknownPhone, i,
                              "unknown phone '" + std::string(tok) + "' at token " + std::to_string(i));
      }
      if (!is_arpabet_vowel(base)) {
        throw PhoneParseError(Kind::StressOnConsonant, i,
                              "stress marker on consonant '" + std::string(tok) + "' at token " +
                                  std::to_string(i));
      }
      if (digit > 2) {
        throw PhoneParseError(Kind::BadStress, i,
                              "stress must be 0, 1 or 2 in '" + std::string(tok) + "' at token " +
                                  std::to_string(i));
      }
      phone.symbol = std::string(base);
      phone.stress = digit;
    } else {
      if (!is_arpabet_phone(tok)) {
        throw PhoneParseError(Kind::UnknownPhone, i,
                              "unknown phone '" + std::string(tok) + "' at token " + std::to_string(i));
      }
      phone.symbol = std::string(tok);
    }
    phones.push_back(std::move(phone));
  }
  return phones;
}

std::string format_arpabet(const std::vector<ArpabetPhone>& phones) {
  std::string out;
  for (const auto& p : phones) {
    if (!out.empty()) out += ' ';
    out += p.symbol;
    if (p.stress) out += static_cast<char>('0' + *p.stress);
  }
  return out;
}

std::string IpaTranscription::to_string() const {
  std::string out;
  for (const auto& s : symbols) {
    if (!out.empty()) out += ' ';
    out += s;
  }
  return out;
}

std::string MappingTable::lookup(const ArpabetPhone& phone) const {
  if (phone.stress) {
    const auto variant = entries_.find(phone.symbol + static_cast<char>('0' + *phone.stress));
    if (variant != entries_.end()) return variant->second;
  }
  const auto it = entries_.find(phone.symbol);
  if (it == entries_.end()) throw Error("mapping table has no entry for '" + phone.symbol + "'");
  return it->second;
}

MappingTable parse_mapping_table(std::string_view text) {
  std::map<std::string, std::string> entries;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t end = std::min(text.find('\n', start), text.size());
    std::string_view line = text.substr(start, end - start);
    start = end + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (trim(line).empty()) {
      if (end == text.size()) break;
      continue;
    }
    const auto tab = line.find('\t');
    if (tab == std::string_view::npos) throw MappingTableError(line_no, "expected ARPABET<TAB>IPA");
    const std::string key(trim(line.substr(0, tab)));
    const std::string ipa(trim(line.substr(tab + 1)));
    if (key.empty() || ipa.empty()) throw MappingTableError(line_no, "empty key or IPA field");
    std::string base = key;
    if (std::isdigit(static_cast<unsigned char>(key.back()))) {
      base = key.substr(0, key.size() - 1);
      if (!is_arpabet_vowel(base) || key.back() > '2') {
        throw MappingTableError(line_no, "invalid stress variant '" + key + "'");
      }
    }
    if (!is_arpabet_phone(base)) throw MappingTableError(line_no, "unknown phone '" + key + "'");
    if (!entries.emplace(key, ipa).second) {
      throw MappingTableError(line_no, "duplicate key '" + key + "'");
    }
    if (end == text.size()) break;
  }
  std::string missing;
  for (std::string_view phone : kInventory) {
    if (!entries.count(std::string(phone))) missing += (missing.empty() ? "" : ", ") + std::string(phone);
  }
  if (!missing.empty()) throw MappingTableError(0, "mapping table is missing phones: " + missing);
  return MappingTable(std::move(entries));
}

MappingTable load_mapping_table(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open mapping table " + path.string());
  const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_mapping_table(text);
}

const MappingTable& default_mapping_table() {
  static const MappingTable table = parse_mapping_table(bundled_mapping_text());
  return table;
}

IpaTranscription to_ipa(const std::vector<ArpabetPhone>& phones, const MappingTable& table) {
  IpaTranscription out;
  out.symbols.reserve(phones.size());
  for (const auto& p : phones) {
    std::string symbol = table.lookup(p);
    if (p.stress == 1) symbol = table.primary_mark + symbol;
    if (p.stress == 2) symbol = table.secondary_mark + symbol;
    out.symbols.push_back(std::move(symbol));
  }
  return out;
}

}  // namespace vqphone
