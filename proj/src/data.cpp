#include "mte/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "mte/rng.hpp"

namespace mte {

namespace {

// The cluster geometry below is a fixed structure: every dataset (source and
// downstream, any seed) samples from the same 16-cluster mixture, so the
// marginal feature distribution never depends on the generation seed. Only
// the labeling rule and the noise draws differ.
constexpr std::uint64_t kStructureSeed = 0x5EEDBA5Eull;
constexpr double kCenterScale = 4.0;
constexpr double kWithinGain = 0.8;
constexpr std::size_t kClusters = 2 * kSourceClasses;

struct TaskStructure {
    double centers[kClusters][kFeatureDim];
    double within[kClusters][kFeatureDim];  // unit within-cluster boundary normals
    double sd[kFeatureDim];                 // analytic per-dim standardization scale
    int base_label[kSourceClasses];         // +1/-1, balanced 4/4
};

void draw_unit(SeedStream& s, double* out, double scale) {
    double norm2 = 0.0;
    for (std::size_t d = 0; d < kFeatureDim; ++d) {
        out[d] = s.normal();
        norm2 += out[d] * out[d];
    }
    const double inv = scale / std::sqrt(norm2);
    for (std::size_t d = 0; d < kFeatureDim; ++d) out[d] *= inv;
}

const TaskStructure& task_structure() {
    static const TaskStructure ts = [] {
        TaskStructure t{};
        SeedStream s(kStructureSeed, Purpose::data_gen);
        for (std::size_t c = 0; c < kSourceClasses; ++c) {
            draw_unit(s, t.centers[2 * c], kCenterScale);
            for (std::size_t d = 0; d < kFeatureDim; ++d)
                t.centers[2 * c + 1][d] = -t.centers[2 * c][d];
        }
        for (std::size_t q = 0; q < kClusters; ++q) draw_unit(s, t.within[q], 1.0);
        // Var per dim: unit noise plus the uniform-over-clusters center term.
        for (std::size_t d = 0; d < kFeatureDim; ++d) {
            double c2 = 0.0;
            for (std::size_t q = 0; q < kClusters; ++q) c2 += t.centers[q][d] * t.centers[q][d];
            t.sd[d] = std::sqrt(1.0 + c2 / static_cast<double>(kClusters));
        }
        std::vector<int> lab(kSourceClasses, 1);
        for (std::size_t c = kSourceClasses / 2; c < kSourceClasses; ++c) lab[c] = -1;
        s.shuffle(lab);
        for (std::size_t c = 0; c < kSourceClasses; ++c) t.base_label[c] = lab[c];
        return t;
    }();
    return ts;
}

void split_indices(std::size_t n, std::size_t train_n, SeedStream& s,
                   std::vector<std::size_t>& train, std::vector<std::size_t>& dev) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    s.shuffle(idx);
    train.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(train_n));
    dev.assign(idx.begin() + static_cast<std::ptrdiff_t>(train_n), idx.end());
}

}  // namespace

Dataset gen_source_task(std::uint64_t seed) {
    const TaskStructure& ts = task_structure();
    SeedStream s(seed, Purpose::data_gen);

    Dataset d;
    d.kind = TaskKind::classification;
    d.classes = kSourceClasses;
    d.task_id = "source";
    d.gen_seed = seed;
    d.x = Matrix(kSourceSize, kFeatureDim);
    d.labels.resize(kSourceSize);

    for (std::size_t i = 0; i < kSourceSize; ++i) {
        const std::size_t c = i % kSourceClasses;  // exact uniform class counts
        const std::size_t q = 2 * c + static_cast<std::size_t>(s.bernoulli(0.5));
        double* row = d.x.row(i);
        for (std::size_t f = 0; f < kFeatureDim; ++f)
            row[f] = (ts.centers[q][f] + s.normal()) / ts.sd[f];
        d.labels[i] = static_cast<int>(c);
    }
    split_indices(kSourceSize, kSourceSize * 4 / 5, s, d.train_idx, d.dev_idx);
    return d;
}

Dataset gen_downstream_task(std::uint64_t seed, TaskKind kind, double hardness, std::size_t n) {
    require(hardness > 0.0 && hardness <= 1.0, ErrKind::contract,
            "gen_downstream_task: hardness must be in (0,1]");
    require(n >= 30, ErrKind::contract, "gen_downstream_task: n too small");
    const TaskStructure& ts = task_structure();
    SeedStream s(seed, Purpose::data_gen);

    Dataset d;
    d.kind = kind;
    d.classes = kind == TaskKind::classification ? 2 : 0;
    d.task_id = kind == TaskKind::classification ? "downstream-cls" : "downstream-reg";
    d.gen_seed = seed;
    d.x = Matrix(n, kFeatureDim);
    if (kind == TaskKind::classification) d.labels.resize(n);
    else d.targets.resize(n);

    // hardness scales both the label noise and how much of each cluster is
    // carved off by the within-cluster boundary; near 0 the labels reduce to
    // the cluster grouping (an easy, near-ceiling task).
    const double flip_p = 0.02 + 0.08 * hardness;
    const double target_noise = 0.02 + 0.05 * hardness;
    const double within_gain = kWithinGain * hardness;

    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t q = static_cast<std::size_t>(s.below(kClusters));
        double eps[kFeatureDim];
        double* row = d.x.row(i);
        double within = 0.0;
        for (std::size_t f = 0; f < kFeatureDim; ++f) {
            eps[f] = s.normal();
            row[f] = (ts.centers[q][f] + eps[f]) / ts.sd[f];
            within += ts.within[q][f] * eps[f];
        }
        const double score = static_cast<double>(ts.base_label[q / 2]) + within_gain * within;
        if (kind == TaskKind::classification) {
            int y = score > 0.0 ? 1 : 0;
            if (s.bernoulli(flip_p)) y = 1 - y;
            d.labels[i] = y;
        } else {
            const double t = 0.5 + 0.25 * score + target_noise * s.normal();
            d.targets[i] = std::clamp(t, 0.0, 1.0);
        }
    }
    split_indices(n, n * 2 / 3, s, d.train_idx, d.dev_idx);
    return d;
}

double majority_class_accuracy(const Dataset& data) {
    require(data.kind == TaskKind::classification, ErrKind::contract,
            "majority_class_accuracy: classification only");
    std::vector<std::size_t> counts(data.classes, 0);
    for (std::size_t i : data.dev_idx) counts[static_cast<std::size_t>(data.labels[i])]++;
    std::size_t best = 0;
    for (std::size_t c : counts) best = std::max(best, c);
    return static_cast<double>(best) / static_cast<double>(data.dev_idx.size());
}

void write_csv(const Dataset& data, const std::vector<std::size_t>& rows, const std::string& path) {
    std::ofstream out(path);
    require(out.good(), ErrKind::missing_artifact, "write_csv: cannot open " + path);
    for (std::size_t f = 0; f < data.x.cols; ++f) out << "f" << f << ",";
    out << "label\n";
    char buf[32];
    for (std::size_t i : rows) {
        const double* row = data.x.row(i);
        for (std::size_t f = 0; f < data.x.cols; ++f) {
            std::snprintf(buf, sizeof buf, "%.17g", row[f]);
            out << buf << ",";
        }
        if (data.kind == TaskKind::classification) {
            out << data.labels[i] << "\n";
        } else {
            std::snprintf(buf, sizeof buf, "%.17g", data.targets[i]);
            out << buf << "\n";
        }
    }
}

}  // namespace mte
