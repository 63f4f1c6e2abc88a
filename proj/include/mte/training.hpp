#ifndef MTE_TRAINING_HPP
#define MTE_TRAINING_HPP

#include <cstdint>
#include <functional>
#include <vector>

#include "mte/data.hpp"
#include "mte/model.hpp"

namespace mte {

struct TrainConfig {
    std::size_t epochs = 10;
    double lr0 = 0.05;
    std::size_t batch_size = 32;
    double dropout_p = 0.1;
    double tau = 0.0;  // masked-L1 coefficient; active only when a CoeffMask is given
    std::uint64_t seed = 0;

    void validate() const;
};

// Affine decay from lr0 at step 0 to exactly 0 at step total_steps.
struct LrSchedule {
    double lr0 = 0.0;
    std::size_t total_steps = 0;
};

double lr_at(const LrSchedule& s, std::size_t step);
double tau_at(double tau0, const LrSchedule& s, std::size_t step);

// Non-negative per-parameter L1 coefficients, aligned with the prunable
// region (same layout as PruneMask bits).
struct CoeffMask {
    std::vector<double> values;

    std::size_t size() const { return values.size(); }
};

// Returns a dataset whose train split is floor(0.9 * n) examples sampled
// without replacement from `data`'s train split; the dev split is unchanged.
Dataset bag_subset(const Dataset& data, std::uint64_t seed);

using StepObserver = std::function<void(std::size_t step, const ParamVector& params)>;

// SGD finetuning with per-step linear LR decay to zero, inverted dropout, and
// gradient masking for pruned weights. When `coeff` is given and cfg.tau > 0,
// tau_t * ||theta (.) coeff||_1 over the prunable region joins the loss, with
// tau_t on the same decay schedule as the learning rate. `init` must already
// be mask-applied; pruned entries stay exactly 0 at every step.
ParamVector finetune(const ModelSpec& spec, const ParamVector& init, const PruneMask* mask,
                     const CoeffMask* coeff, const Dataset& data, const TrainConfig& cfg,
                     const StepObserver& observer = {});

}  // namespace mte

#endif
