#pragma once

#include "brpo/batch.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>

namespace brpo {

/// JSONL: a {"meta": {...}} header line, then one {"s","a","r","sp"} object per transition.
void write_batch(std::ostream& os, const Batch& batch);
std::string batch_to_jsonl(const Batch& batch);
void write_batch_file(const std::string& path, const Batch& batch);

/// Throws ParseError naming the offending line.
Batch read_batch(std::istream& is);
Batch read_batch_file(const std::string& path);

std::uint64_t fnv1a64(std::string_view bytes);
std::string hex64(std::uint64_t h);
std::string file_hash(const std::string& path);

}  // namespace brpo
