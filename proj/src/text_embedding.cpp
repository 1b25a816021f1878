#include "gmt/text_embedding.hpp"

#include <cctype>
#include <cstdint>
#include <fstream>

#include <nlohmann/json.hpp>

namespace gmt {

namespace {

std::uint64_t fnv1a(const char* data, std::size_t n) {
  std::uint64_t h = 1469598103934665603ull;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= static_cast<unsigned char>(data[i]);
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace

TrigramHashEmbedder::TrigramHashEmbedder(Eigen::Index dim) : dim_(dim) {
  if (dim < 2) throw UsageError("TrigramHashEmbedder: dimension must be >= 2");
}

Eigen::VectorXd TrigramHashEmbedder::embed(const std::string& text) const {
  std::string s = " ";
  for (char ch : text) {
    s += static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  }
  s += ' ';

  Eigen::VectorXd v = Eigen::VectorXd::Zero(dim_);
  for (std::size_t i = 0; i + 3 <= s.size(); ++i) {
    const std::uint64_t h = fnv1a(s.data() + i, 3);
    const auto bucket = static_cast<Eigen::Index>(h % static_cast<std::uint64_t>(dim_));
    const double sign = (h >> 63) ? -1.0 : 1.0;
    v(bucket) += sign;
  }
  const double n = v.norm();
  if (n > 0.0) v /= n;
  return v;
}

FileEmbedder::FileEmbedder(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("FileEmbedder: cannot open " + path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError("FileEmbedder: bad JSON in " + path + ": " + e.what());
  }
  if (!doc.is_object() || doc.empty()) {
    throw SchemaError("FileEmbedder: expected a non-empty object in " + path);
  }
  for (auto it = doc.begin(); it != doc.end(); ++it) {
    const auto& arr = it.value();
    if (!arr.is_array()) throw SchemaError("FileEmbedder: values must be arrays");
    Eigen::VectorXd v(static_cast<Eigen::Index>(arr.size()));
    for (std::size_t i = 0; i < arr.size(); ++i) v(static_cast<Eigen::Index>(i)) = arr[i].get<double>();
    if (dim_ == 0) dim_ = v.size();
    if (v.size() != dim_) throw SchemaError("FileEmbedder: inconsistent dimensions");
    table_.emplace(it.key(), std::move(v));
  }
}

Eigen::VectorXd FileEmbedder::embed(const std::string& text) const {
  auto it = table_.find(text);
  if (it == table_.end()) throw SchemaError("FileEmbedder: no embedding for \"" + text + "\"");
  return it->second;
}

std::unique_ptr<TextEmbedder> make_embedder(const std::string& kind,
                                            Eigen::Index fallback_dim,
                                            const std::string& external_path) {
  if (kind == "fallback") return std::make_unique<TrigramHashEmbedder>(fallback_dim);
  if (kind == "external") {
    if (external_path.empty()) {
      throw UsageError("embedder: external provider needs a table path");
    }
    return std::make_unique<FileEmbedder>(external_path);
  }
  throw UsageError("embedder: unknown provider \"" + kind + "\"");
}

}  // namespace gmt
