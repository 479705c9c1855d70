#pragma once

#include "nhss/hss/matvec.hpp"
#include "nhss/pdegen/dataset.hpp"

namespace nhss {

struct RecoveryDataset {
  Dataset data;
  HssMatrix truth;
};

/// Ground truth A = hss_random(d, levels, rank); inputs b_i ~ N(0, I);
/// targets u_i = A b_i.
inline RecoveryDataset gen_hss_recovery_dataset(std::size_t d, std::size_t levels, std::size_t rank, std::size_t n,
                                                std::uint64_t seed) {
  ClusterTree tree(d, levels);
  HssMatrix truth = hss_random(tree, rank, derive_seed(seed, 106, 0));
  Tensor x({n, d});
  for (std::size_t s = 0; s < n; ++s) {
    Rng rng(derive_seed(seed, 105, s));
    for (double& v : x.sample(s)) v = rng.normal();
  }
  Tensor y = Tensor::from_rows(hss_matvec_batch(truth, x.rows()), {n, d});
  GridSpec grid = unit_grid({d}, {d});
  Dataset ds{"hss_recovery", std::move(x), std::move(y), grid, {}};
  ds.meta = {{"generator_version", 1},
             {"seed", seed},
             {"samples", n},
             {"d", d},
             {"levels", levels},
             {"rank", rank},
             {"truth_seed", derive_seed(seed, 106, 0)},
             {"sub_seed", "derive_seed(seed, 105, sample)"}};
  return {std::move(ds), std::move(truth)};
}

}  // namespace nhss
