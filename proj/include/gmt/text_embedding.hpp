#pragma once

#include <map>
#include <memory>
#include <string>

#include <Eigen/Dense>

#include "gmt/errors.hpp"

namespace gmt {

/// Deterministic string-to-vector provider. Equal strings always map to
/// equal vectors and the dimension is fixed for the life of the instance.
class TextEmbedder {
 public:
  virtual ~TextEmbedder() = default;
  virtual Eigen::VectorXd embed(const std::string& text) const = 0;
  virtual Eigen::Index dimension() const = 0;
};

/// Offline fallback: L2-normalized character-trigram hashing into a fixed
/// number of signed buckets.
class TrigramHashEmbedder : public TextEmbedder {
 public:
  explicit TrigramHashEmbedder(Eigen::Index dim = 512);
  Eigen::VectorXd embed(const std::string& text) const override;
  Eigen::Index dimension() const override { return dim_; }

 private:
  Eigen::Index dim_;
};

/// External provider backed by a lookup table loaded from a JSON file of the
/// form {"text": [floats...]}. Throws SchemaError on unknown strings or
/// inconsistent dimensions.
class FileEmbedder : public TextEmbedder {
 public:
  explicit FileEmbedder(const std::string& path);
  Eigen::VectorXd embed(const std::string& text) const override;
  Eigen::Index dimension() const override { return dim_; }

 private:
  std::map<std::string, Eigen::VectorXd> table_;
  Eigen::Index dim_ = 0;
};

/// Factory for the `embedder` config key: "fallback" or "external" (the
/// latter requires a table path).
std::unique_ptr<TextEmbedder> make_embedder(const std::string& kind,
                                            Eigen::Index fallback_dim,
                                            const std::string& external_path);

}  // namespace gmt
