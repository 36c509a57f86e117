#include "sfkit/token.hpp"

namespace sfkit {

void TokenSequence::validate() const {
  if (features.rank() != 2) throw InputError("token features must be [N x C]");
  if (features.extent(0) != coords.size() || modality.size() != coords.size()) {
    throw InputError("token sequence row counts disagree");
  }
}

TokenSequence TokenSequence::filter(Modality keep) const {
  validate();
  TokenSequence out;
  const std::size_t c = channels();
  std::vector<double> rows;
  for (std::size_t i = 0; i < size(); ++i) {
    if (modality[i] != keep) continue;
    out.coords.push_back(coords[i]);
    out.modality.push_back(modality[i]);
    for (std::size_t j = 0; j < c; ++j) rows.push_back(features[i * c + j]);
  }
  out.features = Tensor({out.coords.size(), c}, std::move(rows), features.precision());
  return out;
}

TokenSequence TokenSequence::concat(const TokenSequence& a, const TokenSequence& b) {
  a.validate();
  b.validate();
  if (a.channels() != b.channels()) throw InputError("token concat: channel mismatch");
  TokenSequence out;
  out.coords = a.coords;
  out.coords.insert(out.coords.end(), b.coords.begin(), b.coords.end());
  out.modality = a.modality;
  out.modality.insert(out.modality.end(), b.modality.begin(), b.modality.end());
  std::vector<double> data = a.features.values();
  data.insert(data.end(), b.features.values().begin(), b.features.values().end());
  out.features = Tensor({out.coords.size(), a.channels()}, std::move(data), a.features.precision());
  return out;
}

std::vector<std::size_t> invert_permutation(const std::vector<std::size_t>& perm) {
  std::vector<std::size_t> inv(perm.size());
  for (std::size_t r = 0; r < perm.size(); ++r) {
    if (perm[r] >= perm.size()) throw InputError("invalid permutation entry");
    inv[perm[r]] = r;
  }
  return inv;
}

Tensor gather_rows(const Tensor& features, const std::vector<std::size_t>& perm) {
  const std::size_t n = features.extent(0), c = features.extent(1);
  if (perm.size() != n) throw InputError("gather_rows: permutation length mismatch");
  Tensor out({n, c}, features.precision());
  for (std::size_t r = 0; r < n; ++r) {
    const std::size_t src = perm[r];
    for (std::size_t j = 0; j < c; ++j) out[r * c + j] = features[src * c + j];
  }
  return out;
}

}  // namespace sfkit
