#ifndef MTE_PRUNING_HPP
#define MTE_PRUNING_HPP

#include <cstdint>
#include <vector>

#include "mte/model.hpp"
#include "mte/training.hpp"

namespace mte {

struct ImpConfig {
    // Per-round budget as a fraction of the ORIGINAL prunable count (the
    // default), so rounds * per_round_fraction lands exactly on target_ratio.
    // Budget::remaining is the prune-10%-of-survivors alternative.
    double per_round_fraction = 0.10;
    double target_ratio = 0.30;

    enum class Budget { original, remaining };
    enum class Ranking { global, per_layer };
    Budget budget = Budget::original;
    Ranking ranking = Ranking::global;

    std::size_t rounds() const;
    void validate() const;
};

// Extends `current` with exactly k additional zeros at the k smallest-|theta|
// surviving prunable weights, ranked globally across layers; ties broken by
// lowest flat index.
PruneMask magnitude_prune(const ParamVector& params, const PruneMask& current, std::size_t k);

// Same budget but ranked within each prunable layer separately; k is split
// across layers proportionally to their original sizes.
PruneMask magnitude_prune_per_layer(const ParamVector& params, const PruneMask& current,
                                    std::size_t k);

// Finetune-prune-reset driver. Each round finetunes the masked theta0 for the
// full schedule (with the coeff-masked L1 when given), extends the mask by
// the round budget, and resets the survivors (and the head) back to theta0.
// Returns the mask at target sparsity; round_masks, when non-null, receives
// the mask after every round.
PruneMask run_imp(const ModelSpec& spec, const ParamVector& theta0, const Dataset& data,
                  const TrainConfig& cfg, const ImpConfig& imp, const CoeffMask* coeff,
                  std::vector<PruneMask>* round_masks = nullptr);

// Element-wise mean of the previous seeds' surviving masks: the coefficient
// mask for the i-th seed of the sequential (active) policy.
CoeffMask active_coeff(const std::vector<PruneMask>& previous_masks);

// Independent binary coefficient mask: each entry is Bernoulli with
// P(0) = target_ratio, drawn from the random-mask stream of `seed`.
CoeffMask random_coeff(std::uint64_t seed, std::size_t n, double target_ratio);

// |a AND b| / |a OR b| over surviving sets.
double mask_iou(const PruneMask& a, const PruneMask& b);

// Symmetric IoU matrix; diagonal is exactly 1.
Matrix overlap_matrix(const std::vector<PruneMask>& masks);

}  // namespace mte

#endif
