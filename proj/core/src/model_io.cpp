// Copyright 2026 The DEER Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "deer/model_io.hpp"

#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace deer {

namespace {

using nlohmann::json;

json row_to_json(const Context& ctx, const LogitRow& logits, int offset) {
  json row;
  row["context"] = ctx;
  if (offset > 0) {
    row["offset"] = offset;
  }
  row["logits"] = logits;
  return row;
}

json parse_document(const std::string& text, const char* expected_kind) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("model: malformed JSON: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("kind") || !doc["kind"].is_string()) {
    throw std::runtime_error("model: missing \"kind\"");
  }
  if (doc["kind"].get<std::string>() != expected_kind) {
    throw std::runtime_error(std::string("model: expected kind \"") + expected_kind +
                             "\", got \"" + doc["kind"].get<std::string>() + "\"");
  }
  return doc;
}

LogitRow read_logits(const json& j, std::size_t expected) {
  if (!j.is_array() || j.size() != expected) {
    throw std::runtime_error("model: logit row has wrong dimension");
  }
  LogitRow row;
  row.reserve(expected);
  for (const auto& v : j) {
    if (!v.is_number()) {
      throw std::runtime_error("model: non-numeric logit");
    }
    row.push_back(v.get<double>());
  }
  return row;
}

Context read_context(const json& j, int order) {
  if (!j.is_array() || j.size() != static_cast<std::size_t>(order)) {
    throw std::runtime_error("model: context has wrong length");
  }
  Context ctx;
  ctx.reserve(j.size());
  for (const auto& v : j) {
    if (!v.is_number_integer()) {
      throw std::runtime_error("model: non-integer context token");
    }
    ctx.push_back(v.get<TokenId>());
  }
  return ctx;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("model: cannot open file: " + path);
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw std::runtime_error("model: cannot write file: " + path);
  }
  out << text;
}

}  // namespace

std::string serialize_model(const TargetParams& params) {
  params.validate();
  json doc;
  doc["kind"] = "target";
  doc["vocab_size"] = params.vocab.size;
  doc["order"] = params.order;
  json rows = json::array();
  for (const auto& [ctx, logits] : params.table) {
    rows.push_back(row_to_json(ctx, logits, 0));
  }
  doc["rows"] = std::move(rows);
  doc["default_logits"] = params.default_logits;
  return doc.dump(2) + "\n";
}

std::string serialize_model(const DrafterParams& params) {
  params.validate();
  json doc;
  doc["kind"] = "drafter";
  doc["vocab_size"] = params.vocab.size;
  doc["order"] = params.order;
  doc["max_offset"] = params.max_offset;
  json rows = json::array();
  for (const auto& [ctx, offset_rows] : params.table) {
    for (std::size_t d = 0; d < offset_rows.size(); ++d) {
      rows.push_back(row_to_json(ctx, offset_rows[d], static_cast<int>(d) + 1));
    }
  }
  doc["rows"] = std::move(rows);
  doc["default_logits"] = params.default_logits;
  return doc.dump(2) + "\n";
}

TargetParams deserialize_target(const std::string& text) {
  const json doc = parse_document(text, "target");
  TargetParams params;
  try {
    params.vocab = Vocab::of_size(doc.at("vocab_size").get<std::int32_t>());
    params.order = doc.at("order").get<int>();
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("model: bad header field: ") + e.what());
  }
  const auto expected = static_cast<std::size_t>(params.vocab.dist_size());
  params.default_logits = read_logits(doc.at("default_logits"), expected);
  if (doc.contains("rows")) {
    for (const auto& row : doc.at("rows")) {
      Context ctx = read_context(row.at("context"), params.order);
      if (!params.table.emplace(std::move(ctx), read_logits(row.at("logits"), expected)).second) {
        throw std::runtime_error("model: duplicate context row");
      }
    }
  }
  try {
    params.validate();
  } catch (const std::invalid_argument& e) {
    throw std::runtime_error(std::string("model: ") + e.what());
  }
  return params;
}

DrafterParams deserialize_drafter(const std::string& text) {
  const json doc = parse_document(text, "drafter");
  DrafterParams params;
  try {
    params.vocab = Vocab::of_size(doc.at("vocab_size").get<std::int32_t>());
    params.order = doc.at("order").get<int>();
    params.max_offset = doc.at("max_offset").get<int>();
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("model: bad header field: ") + e.what());
  }
  const auto expected = static_cast<std::size_t>(params.vocab.dist_size());
  params.default_logits = read_logits(doc.at("default_logits"), expected);
  if (doc.contains("rows")) {
    for (const auto& row : doc.at("rows")) {
      Context ctx = read_context(row.at("context"), params.order);
      if (!row.contains("offset") || !row.at("offset").is_number_integer()) {
        throw std::runtime_error("model: drafter row is missing its offset");
      }
      const int offset = row.at("offset").get<int>();
      if (offset < 1 || offset > params.max_offset) {
        throw std::runtime_error("model: drafter row offset out of range");
      }
      auto& rows_for_ctx = params.table[ctx];
      if (rows_for_ctx.empty()) {
        rows_for_ctx.resize(static_cast<std::size_t>(params.max_offset));
      }
      auto& slot = rows_for_ctx[static_cast<std::size_t>(offset - 1)];
      if (!slot.empty()) {
        throw std::runtime_error("model: duplicate (context, offset) row");
      }
      slot = read_logits(row.at("logits"), expected);
    }
  }
  // Missing offsets for a context would leave empty rows behind; reject.
  for (const auto& [ctx, rows_for_ctx] : params.table) {
    for (const auto& r : rows_for_ctx) {
      if (r.empty()) {
        throw std::runtime_error("model: context is missing rows for some offsets");
      }
    }
  }
  try {
    params.validate();
  } catch (const std::invalid_argument& e) {
    throw std::runtime_error(std::string("model: ") + e.what());
  }
  return params;
}

void save_model(const TargetParams& params, const std::string& path) {
  write_file(path, serialize_model(params));
}

void save_model(const DrafterParams& params, const std::string& path) {
  write_file(path, serialize_model(params));
}

TargetParams load_target(const std::string& path) {
  return deserialize_target(read_file(path));
}

DrafterParams load_drafter(const std::string& path) {
  return deserialize_drafter(read_file(path));
}

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = digits[h & 0xF];
    h >>= 4;
  }
  return out;
}

std::string model_hash(const TargetParams& params) {
  return fnv1a_hex(serialize_model(params));
}

std::string model_hash(const DrafterParams& params) {
  return fnv1a_hex(serialize_model(params));
}

}  // namespace deer
