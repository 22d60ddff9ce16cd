#include "brpo/batch_io.hpp"

#include "brpo/error.hpp"

#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <sstream>

namespace brpo {

namespace {

using Json = nlohmann::json;

Json meta_to_json(const BatchMeta& m) {
  Json j;
  j["env"] = m.env;
  j["env_hash"] = m.env_hash;
  j["gamma"] = m.gamma;
  if (m.behavior) {
    Json rows = Json::array();
    for (Eigen::Index s = 0; s < m.behavior->rows(); ++s) {
      Json row = Json::array();
      for (Eigen::Index a = 0; a < m.behavior->cols(); ++a) row.push_back((*m.behavior)(s, a));
      rows.push_back(std::move(row));
    }
    j["behavior"] = std::move(rows);
  } else {
    j["behavior"] = nullptr;
  }
  j["epsilon"] = m.epsilon;
  j["quality"] = m.quality;
  j["seed"] = m.seed;
  j["n"] = m.n;
  j["episode_cap"] = m.episode_cap;
  j["n_states"] = m.n_states;
  j["n_actions"] = m.n_actions;
  return j;
}

BatchMeta meta_from_json(const Json& j, std::size_t line) {
  try {
    BatchMeta m;
    m.env = j.at("env").get<std::string>();
    m.env_hash = j.at("env_hash").get<std::string>();
    m.gamma = j.at("gamma").get<double>();
    if (j.contains("behavior") && !j["behavior"].is_null()) {
      const Json& rows = j["behavior"];
      const auto S = static_cast<Eigen::Index>(rows.size());
      const auto A = S ? static_cast<Eigen::Index>(rows[0].size()) : 0;
      Table t(S, A);
      for (Eigen::Index s = 0; s < S; ++s) {
        if (static_cast<Eigen::Index>(rows[static_cast<std::size_t>(s)].size()) != A) {
          throw ParseError("ragged behavior table", line);
        }
        for (Eigen::Index a = 0; a < A; ++a) {
          t(s, a) = rows[static_cast<std::size_t>(s)][static_cast<std::size_t>(a)].get<double>();
        }
      }
      m.behavior = std::move(t);
    }
    m.epsilon = j.at("epsilon").get<double>();
    m.quality = j.at("quality").get<double>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.n = j.at("n").get<std::size_t>();
    m.episode_cap = j.at("episode_cap").get<std::size_t>();
    m.n_states = j.at("n_states").get<std::size_t>();
    m.n_actions = j.at("n_actions").get<std::size_t>();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("bad batch header: ") + e.what(), line);
  }
}

std::size_t index_field(const Json& j, const char* key, std::size_t line) {
  if (!j.contains(key)) throw ParseError(std::string("missing field '") + key + "'", line);
  const Json& v = j[key];
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0)) {
    throw ParseError(std::string("field '") + key + "' must be a nonnegative integer", line);
  }
  return v.get<std::size_t>();
}

}  // namespace

void write_batch(std::ostream& os, const Batch& batch) {
  BatchMeta meta = batch.meta;
  meta.n = batch.size();
  os << Json{{"meta", meta_to_json(meta)}}.dump() << '\n';
  for (const Transition& t : batch.transitions) {
    os << "{\"s\":" << t.s << ",\"a\":" << t.a << ",\"r\":" << Json(t.r).dump() << ",\"sp\":" << t.sp << "}\n";
  }
}

std::string batch_to_jsonl(const Batch& batch) {
  std::ostringstream os;
  write_batch(os, batch);
  return os.str();
}

void write_batch_file(const std::string& path, const Batch& batch) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open '" + path + "' for writing");
  write_batch(f, batch);
  if (!f) throw Error("failed writing '" + path + "'");
}

Batch read_batch(std::istream& is) {
  Batch batch;
  std::string text;
  std::size_t line = 0;
  if (!std::getline(is, text)) throw ParseError("empty batch file", 1);
  ++line;
  Json header;
  try {
    header = Json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed header: ") + e.what(), line);
  }
  if (!header.is_object() || !header.contains("meta")) throw ParseError("header must hold a 'meta' object", line);
  batch.meta = meta_from_json(header["meta"], line);
  batch.transitions.reserve(batch.meta.n);
  while (std::getline(is, text)) {
    ++line;
    if (text.empty()) throw ParseError("empty line", line);
    Json j;
    try {
      j = Json::parse(text);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(std::string("malformed transition: ") + e.what(), line);
    }
    if (!j.is_object()) throw ParseError("transition must be an object", line);
    Transition t;
    t.s = index_field(j, "s", line);
    t.a = index_field(j, "a", line);
    t.sp = index_field(j, "sp", line);
    if (!j.contains("r") || !j["r"].is_number()) throw ParseError("field 'r' must be a number", line);
    t.r = j["r"].get<double>();
    if (j.size() != 4) throw ParseError("unexpected fields in transition", line);
    if ((batch.meta.n_states && (t.s >= batch.meta.n_states || t.sp >= batch.meta.n_states)) ||
        (batch.meta.n_actions && t.a >= batch.meta.n_actions)) {
      throw ParseError("transition index out of range", line);
    }
    batch.transitions.push_back(t);
  }
  if (batch.transitions.size() != batch.meta.n) {
    throw ParseError("header declares " + std::to_string(batch.meta.n) + " transitions but file has " +
                         std::to_string(batch.transitions.size()),
                     line + 1);
  }
  return batch;
}

Batch read_batch_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open '" + path + "'");
  return read_batch(f);
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string file_hash(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  return hex64(fnv1a64(ss.str()));
}

}  // namespace brpo
