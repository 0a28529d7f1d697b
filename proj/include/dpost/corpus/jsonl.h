#pragma once

#include <filesystem>
#include <string>

#include "dpost/corpus/problem.h"

namespace dpost::corpus {

// One problem per line:
//   {"id": str, "question": str, "rationale": str|null, "answer": str}
// Pseudo and filtered sets add "provenance". When `config_hash` is non-empty
// it is written as "config_hash" on every line.
std::string to_jsonl(const Dataset& dataset, const std::string& config_hash = "");
Dataset from_jsonl(const std::string& text, DatasetKind kind);

void write_jsonl(const std::filesystem::path& path, const Dataset& dataset, const std::string& config_hash = "");
// Throws DataError on unreadable files or malformed lines.
Dataset read_jsonl(const std::filesystem::path& path, DatasetKind kind);

}  // namespace dpost::corpus
