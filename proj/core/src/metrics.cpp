#include "sfkit/metrics.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace sfkit {

MetricsReport::MetricsReport(const std::string& name, std::uint64_t seed,
                             std::uint64_t config_hash, const std::string& precision,
                             int workers) {
  doc_["schema"] = 1;
  doc_["report"] = name;
  nlohmann::ordered_json prov;
  prov["seed"] = seed;
  std::ostringstream hash_hex;
  hash_hex << std::hex << config_hash;
  prov["config_hash"] = hash_hex.str();
  prov["precision"] = precision;
  prov["workers"] = workers;
  doc_["provenance"] = std::move(prov);
  doc_["metrics"] = nlohmann::ordered_json::object();
}

void MetricsReport::set(const std::string& key, double value) {
  if (!std::isfinite(value)) {
    throw InvariantError("metric '" + key + "' is not finite");
  }
  doc_["metrics"][key] = value;
}

void MetricsReport::set_int(const std::string& key, std::int64_t value) {
  doc_["metrics"][key] = value;
}

void MetricsReport::set_string(const std::string& key, const std::string& value) {
  doc_["metrics"][key] = value;
}

void MetricsReport::set_bool(const std::string& key, bool value) { doc_["metrics"][key] = value; }

void MetricsReport::set_json(const std::string& key, nlohmann::ordered_json value) {
  doc_["metrics"][key] = std::move(value);
}

double MetricsReport::get(const std::string& key) const {
  if (!doc_["metrics"].contains(key)) throw InputError("missing metric '" + key + "'");
  return doc_["metrics"][key].get<double>();
}

void MetricsReport::check_finite() const {
  for (const auto& [key, value] : doc_["metrics"].items()) {
    if (value.is_number_float() && !std::isfinite(value.get<double>())) {
      throw InvariantError("metric '" + key + "' is not finite");
    }
  }
}

std::string MetricsReport::to_string() const { return doc_.dump(2) + "\n"; }

void MetricsReport::save(const std::string& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw InputError("cannot open '" + path + "' for writing");
  os << to_string();
}

std::uint64_t fnv1a_hash(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t hash_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw InputError("cannot open '" + path + "' for hashing");
  std::ostringstream ss;
  ss << is.rdbuf();
  return fnv1a_hash(ss.str());
}

void write_pgm(const std::string& path, int width, int height,
               const std::vector<double>& values) {
  if (values.size() != static_cast<std::size_t>(width) * height) {
    throw InputError("write_pgm: value count does not match dimensions");
  }
  std::ofstream os(path, std::ios::binary);
  if (!os) throw InputError("cannot open '" + path + "' for writing");
  os << "P5\n" << width << " " << height << "\n255\n";
  for (double v : values) {
    double clamped = v;
    if (!(clamped >= 0.0)) clamped = 0.0;
    if (clamped > 1.0) clamped = 1.0;
    os.put(static_cast<char>(static_cast<int>(std::lround(clamped * 255.0))));
  }
}

}  // namespace sfkit
