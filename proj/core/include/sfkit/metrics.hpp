#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "sfkit/errors.hpp"

namespace sfkit {

/// Versioned JSON report with a provenance block (seed, config hash,
/// precision, workers). Keys keep insertion order so serialized reports are
/// byte-stable.
class MetricsReport {
 public:
  MetricsReport(const std::string& name, std::uint64_t seed, std::uint64_t config_hash,
                const std::string& precision, int workers);

  void set(const std::string& key, double value);
  void set_int(const std::string& key, std::int64_t value);
  void set_string(const std::string& key, const std::string& value);
  void set_bool(const std::string& key, bool value);
  void set_json(const std::string& key, nlohmann::ordered_json value);

  double get(const std::string& key) const;

  /// Throws InvariantError if any numeric metric is NaN or Inf.
  void check_finite() const;

  std::string to_string() const;
  void save(const std::string& path) const;
  const nlohmann::ordered_json& json() const { return doc_; }

 private:
  nlohmann::ordered_json doc_;
};

/// FNV-1a 64-bit over raw bytes; config hashes are reproducible from the
/// config file bytes.
std::uint64_t fnv1a_hash(const std::string& bytes);
std::uint64_t hash_file(const std::string& path);

/// Binary PGM (P5) heatmap; values clamped to [0,1] and scaled to 0..255.
void write_pgm(const std::string& path, int width, int height,
               const std::vector<double>& values);

}  // namespace sfkit
