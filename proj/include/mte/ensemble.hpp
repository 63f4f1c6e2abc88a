#ifndef MTE_ENSEMBLE_HPP
#define MTE_ENSEMBLE_HPP

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "mte/data.hpp"
#include "mte/model.hpp"

namespace mte {

enum class Scheme { baseline, bagging, base_lt, active_lt, random_lt };

std::string_view scheme_name(Scheme s);
Scheme scheme_from_name(std::string_view name);
inline constexpr Scheme kAllSchemes[] = {Scheme::baseline, Scheme::bagging, Scheme::base_lt,
                                         Scheme::active_lt, Scheme::random_lt};

// One trained ensemble member. If a mask is present the params are already
// mask-applied. group records the two-group evaluation protocol slot.
struct MemberCheckpoint {
    ParamVector params;
    std::optional<PruneMask> mask;
    std::uint64_t seed = 0;
    Scheme scheme = Scheme::baseline;
    int group = 1;
};

// Inference outputs for one member: post-softmax probabilities for
// classification, raw scalars for regression. Dropout is disabled.
Matrix predict(const ModelSpec& spec, const ParamVector& params, const Matrix& inputs);

// Element-wise mean of the member outputs.
Matrix ensemble_predict(const ModelSpec& spec, const std::vector<const MemberCheckpoint*>& members,
                        const Matrix& inputs);

// members x samples x output_width raw outputs, computed once and shared by
// every combination evaluated afterwards.
struct PredictionTable {
    std::size_t members = 0;
    std::size_t samples = 0;
    std::size_t width = 0;
    TaskKind kind = TaskKind::classification;
    std::vector<double> raw;
    std::vector<int> hard;  // argmax per (member, sample); classification only

    const double* row(std::size_t member, std::size_t sample) const {
        return raw.data() + (member * samples + sample) * width;
    }
    int hard_label(std::size_t member, std::size_t sample) const {
        return hard[member * samples + sample];
    }
};

PredictionTable build_prediction_table(const ModelSpec& spec,
                                       const std::vector<MemberCheckpoint>& members,
                                       const Matrix& inputs);

// All C(n,k) index subsets of {0..n-1} in lexicographic order.
std::vector<std::vector<std::size_t>> enumerate_combos(std::size_t n, std::size_t k);

// The two-group protocol: single is the mean member metric over all 20 seeds;
// ens averages the ensemble metric over every C(10,k) combination within each
// group, then across the two groups; diff = ens - single. The metric is
// accuracy for classification and the Pearson correlation for regression.
struct SchemeEval {
    double single = 0.0;
    double ens = 0.0;
    double diff = 0.0;
    std::vector<double> member_metric;  // one per member, pool order
    std::vector<double> combo_metric;   // group 1 combos then group 2 combos
};

SchemeEval evaluate_scheme(const ModelSpec& spec, const std::vector<MemberCheckpoint>& pool,
                           std::size_t k, const Dataset& eval_data);

double pearson(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace mte

#endif
