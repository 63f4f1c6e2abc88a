#ifndef MTE_DATA_HPP
#define MTE_DATA_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "mte/matrix.hpp"
#include "mte/model.hpp"

namespace mte {

// Synthetic task with frozen train/dev splits. Features are standardized at
// generation time (analytic per-dimension scale of the generating mixture),
// so no preprocessing pipeline exists downstream.
struct Dataset {
    Matrix x;                        // n x input_width
    std::vector<int> labels;         // classification targets
    std::vector<double> targets;     // regression targets in [0,1]
    TaskKind kind = TaskKind::classification;
    std::size_t classes = 0;
    std::vector<std::size_t> train_idx;
    std::vector<std::size_t> dev_idx;
    std::string task_id;
    std::uint64_t gen_seed = 0;

    std::size_t size() const { return x.rows; }
};

inline constexpr std::size_t kFeatureDim = 16;
inline constexpr std::size_t kSourceClasses = 8;
inline constexpr std::size_t kSourceSize = 8000;

// 8-class Gaussian mixture in 16 dims with two antipodal clusters per class,
// n = 8000, exactly n/8 samples per class. The cluster geometry is a fixed
// structure shared with the downstream tasks; `seed` drives only the draws.
Dataset gen_source_task(std::uint64_t seed);

// Binary classification (or [0,1]-target regression) over the same input
// mixture with a cluster-grouped decision structure plus a per-cluster
// within-cluster boundary, so pretrained features transfer partially.
// `hardness` in (0,1] scales the label noise. Classification defaults to the
// MRPC-sized n = 1200 regime.
Dataset gen_downstream_task(std::uint64_t seed, TaskKind kind, double hardness,
                            std::size_t n = 1200);

// Accuracy of always answering the most frequent dev class.
double majority_class_accuracy(const Dataset& data);

// CSV layout: header row, features f0..f15, then the label column.
void write_csv(const Dataset& data, const std::vector<std::size_t>& rows, const std::string& path);

}  // namespace mte

#endif
