#include "dpost/corpus/jsonl.h"

#include <fstream>
#include <json.hpp>
#include <sstream>

#include "dpost/common/error.h"
#include "dpost/corpus/answer.h"

namespace dpost::corpus {

using nlohmann::json;

std::string to_jsonl(const Dataset& dataset, const std::string& config_hash) {
  std::string out;
  for (size_t i = 0; i < dataset.items.size(); ++i) {
    const Problem& p = dataset.items[i];
    json line = {{"id", p.id},
                 {"question", p.question},
                 {"rationale", p.gold_rationale ? json(p.gold_rationale->text) : json(nullptr)},
                 {"answer", p.answer_text}};
    if (i < dataset.provenance.size()) line["provenance"] = dataset.provenance[i];
    if (!config_hash.empty()) line["config_hash"] = config_hash;
    out += line.dump();
    out += '\n';
  }
  return out;
}

Dataset from_jsonl(const std::string& text, DatasetKind kind) {
  Dataset out;
  out.kind = kind;
  std::istringstream in(text);
  std::string line;
  size_t line_no = 0;
  bool any_provenance = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      json j = json::parse(line);
      Problem p;
      p.id = j.at("id").get<std::string>();
      p.question = j.at("question").get<std::string>();
      const json& r = j.at("rationale");
      if (!r.is_null()) p.gold_rationale = Rationale::from_text(r.get<std::string>());
      p.answer_text = j.at("answer").get<std::string>();
      p.gold_answer = parse_number(p.answer_text);
      out.items.push_back(std::move(p));
      if (j.contains("provenance")) {
        out.provenance.resize(out.items.size() - 1);
        out.provenance.push_back(j["provenance"].get<std::string>());
        any_provenance = true;
      }
    } catch (const json::exception& e) {
      throw DataError("jsonl line " + std::to_string(line_no) + ": " + e.what());
    } catch (const UnparseableAnswer& e) {
      throw DataError("jsonl line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (any_provenance) out.provenance.resize(out.items.size());
  return out;
}

void write_jsonl(const std::filesystem::path& path, const Dataset& dataset, const std::string& config_hash) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << to_jsonl(dataset, config_hash);
  if (!out) throw DataError("write failed for " + path.string());
}

Dataset read_jsonl(const std::filesystem::path& path, DatasetKind kind) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return from_jsonl(buf.str(), kind);
}

}  // namespace dpost::corpus
