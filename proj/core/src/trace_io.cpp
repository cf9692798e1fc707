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

#include "deer/trace_io.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace deer {

namespace {

using nlohmann::json;

json cycle_to_json(const CycleRecord& c) {
  json rec;
  rec["type"] = "cycle";
  rec["prefix_len_before"] = c.prefix_len_before;
  rec["k"] = c.k;
  rec["accepted"] = c.accepted;
  rec["resample_positions"] = c.resample_positions;
  rec["emitted"] = c.emitted;
  rec["ended_with_eos"] = c.ended_with_eos;
  rec["truncated"] = c.truncated;
  return rec;
}

CycleRecord cycle_from_json(const json& rec) {
  CycleRecord c;
  c.prefix_len_before = rec.at("prefix_len_before").get<int>();
  c.k = rec.at("k").get<int>();
  c.accepted = rec.at("accepted").get<std::vector<bool>>();
  c.resample_positions = rec.at("resample_positions").get<std::vector<int>>();
  c.emitted = rec.at("emitted").get<TokenSeq>();
  c.ended_with_eos = rec.at("ended_with_eos").get<bool>();
  c.truncated = rec.at("truncated").get<bool>();
  if (c.accepted.size() != static_cast<std::size_t>(c.k)) {
    throw std::runtime_error("trace: accepted flag count differs from k");
  }
  if (c.emitted.empty() || c.emitted.size() > static_cast<std::size_t>(c.k)) {
    throw std::runtime_error("trace: emitted count out of range");
  }
  return c;
}

}  // namespace

std::string traces_to_jsonl(std::span<const DecodeTrace> traces,
                            const std::string& target_hash,
                            const std::string& drafter_hash) {
  std::ostringstream out;
  for (const DecodeTrace& trace : traces) {
    json header;
    header["type"] = "header";
    header["schema_version"] = 1;
    header["seed"] = trace.seed;
    header["stream"] = trace.stream;
    header["k"] = trace.k;
    header["temperature"] = trace.temperature;
    header["drafter_kind"] = trace.drafter_kind;
    header["target_hash"] = target_hash;
    header["drafter_hash"] = drafter_hash;

    std::size_t emitted_total = 0;
    for (const CycleRecord& c : trace.cycles) {
      emitted_total += c.emitted.size();
    }
    if (emitted_total > trace.output.size()) {
      throw std::invalid_argument("trace: emitted tokens exceed output length");
    }
    header["prompt"] = TokenSeq(trace.output.begin(),
                                trace.output.end() - static_cast<std::ptrdiff_t>(emitted_total));
    out << header.dump() << "\n";

    for (const CycleRecord& c : trace.cycles) {
      out << cycle_to_json(c).dump() << "\n";
    }
    json output_rec;
    output_rec["type"] = "output";
    output_rec["tokens"] = trace.output;
    out << output_rec.dump() << "\n";
  }
  return out.str();
}

std::vector<DecodeTrace> traces_from_jsonl(const std::string& text) {
  std::vector<DecodeTrace> traces;
  DecodeTrace current;
  TokenSeq prompt;
  bool in_trace = false;

  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::exception& e) {
      throw std::runtime_error("trace: malformed JSONL at line " + std::to_string(line_no) +
                               ": " + e.what());
    }
    const std::string type = rec.at("type").get<std::string>();
    if (type == "header") {
      if (in_trace) {
        throw std::runtime_error("trace: header before previous output record");
      }
      current = DecodeTrace{};
      current.seed = rec.at("seed").get<std::uint64_t>();
      current.stream = rec.at("stream").get<std::uint64_t>();
      current.k = rec.at("k").get<int>();
      current.temperature = rec.at("temperature").get<double>();
      current.drafter_kind = rec.at("drafter_kind").get<std::string>();
      prompt = rec.at("prompt").get<TokenSeq>();
      in_trace = true;
    } else if (type == "cycle") {
      if (!in_trace) {
        throw std::runtime_error("trace: cycle record before header");
      }
      current.cycles.push_back(cycle_from_json(rec));
    } else if (type == "output") {
      if (!in_trace) {
        throw std::runtime_error("trace: output record before header");
      }
      current.output = rec.at("tokens").get<TokenSeq>();

      TokenSeq reconstructed = prompt;
      for (const CycleRecord& c : current.cycles) {
        reconstructed.insert(reconstructed.end(), c.emitted.begin(), c.emitted.end());
      }
      if (reconstructed != current.output) {
        throw std::runtime_error("trace: output differs from prompt ++ emitted tokens");
      }
      traces.push_back(std::move(current));
      in_trace = false;
    } else {
      throw std::runtime_error("trace: unknown record type \"" + type + "\"");
    }
  }
  if (in_trace) {
    throw std::runtime_error("trace: missing output record at end of input");
  }
  return traces;
}

void save_traces(std::span<const DecodeTrace> traces, const std::string& path,
                 const std::string& target_hash, const std::string& drafter_hash) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw std::runtime_error("trace: cannot write file: " + path);
  }
  out << traces_to_jsonl(traces, target_hash, drafter_hash);
}

std::vector<DecodeTrace> load_traces(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("trace: cannot open file: " + path);
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return traces_from_jsonl(ss.str());
}

}  // namespace deer
