#include "mte/pruning.hpp"

#include <algorithm>
#include <cmath>

#include "mte/rng.hpp"

namespace mte {

void ImpConfig::validate() const {
    if (target_ratio == 0.0) return;  // degenerate: no pruning
    require(per_round_fraction > 0.0 && per_round_fraction <= target_ratio && target_ratio < 1.0,
            ErrKind::contract, "imp: need 0 < per_round_fraction <= target_ratio < 1");
    if (budget == Budget::original) {
        const double r = target_ratio / per_round_fraction;
        require(std::fabs(r - std::round(r)) < 1e-9, ErrKind::contract,
                "imp: rounds mismatch, target_ratio must be a whole multiple of per_round_fraction");
    }
}

std::size_t ImpConfig::rounds() const {
    validate();
    if (target_ratio == 0.0) return 0;
    if (budget == Budget::original)
        return static_cast<std::size_t>(std::llround(target_ratio / per_round_fraction));
    // Smallest R with 1 - (1-f)^R >= target.
    std::size_t r = 0;
    double kept = 1.0;
    while (kept > 1.0 - target_ratio + 1e-12) {
        kept *= 1.0 - per_round_fraction;
        ++r;
    }
    return r;
}

namespace {

struct Candidate {
    double mag;
    std::size_t idx;  // flat index into the mask bit vector
};

// Zeroes the k smallest-magnitude alive entries among `cands` in `mask`.
void drop_smallest(std::vector<Candidate>& cands, std::size_t k, PruneMask& mask) {
    std::partial_sort(cands.begin(), cands.begin() + static_cast<std::ptrdiff_t>(k), cands.end(),
                      [](const Candidate& a, const Candidate& b) {
                          return a.mag != b.mag ? a.mag < b.mag : a.idx < b.idx;
                      });
    for (std::size_t i = 0; i < k; ++i) mask.bits[cands[i].idx] = 0;
}

}  // namespace

PruneMask magnitude_prune(const ParamVector& params, const PruneMask& current, std::size_t k) {
    PruneMask out = current;
    std::vector<Candidate> cands;
    for (const auto& piece : prunable_layout(params, current)) {
        for (std::size_t i = 0; i < piece.count; ++i)
            if (current.bits[piece.mask_offset + i])
                cands.push_back({std::fabs(params.data[piece.param_offset + i]),
                                 piece.mask_offset + i});
    }
    require(k <= cands.size(), ErrKind::contract,
            "magnitude_prune: k exceeds surviving prunable weights");
    if (k == 0) return out;
    drop_smallest(cands, k, out);
    return out;
}

PruneMask magnitude_prune_per_layer(const ParamVector& params, const PruneMask& current,
                                    std::size_t k) {
    const auto pieces = prunable_layout(params, current);
    const std::size_t total = current.size();
    require(total > 0, ErrKind::contract, "magnitude_prune: empty prunable region");

    // Largest-remainder split of k proportional to original layer sizes.
    std::vector<std::size_t> quota(pieces.size());
    std::vector<std::pair<double, std::size_t>> rema(pieces.size());
    std::size_t assigned = 0;
    for (std::size_t p = 0; p < pieces.size(); ++p) {
        const double exact = static_cast<double>(k) * static_cast<double>(pieces[p].count) /
                             static_cast<double>(total);
        quota[p] = static_cast<std::size_t>(exact);
        rema[p] = {exact - static_cast<double>(quota[p]), p};
        assigned += quota[p];
    }
    std::sort(rema.begin(), rema.end(), [](const auto& a, const auto& b) {
        return a.first != b.first ? a.first > b.first : a.second < b.second;
    });
    for (std::size_t i = 0; assigned < k; ++i, ++assigned) quota[rema[i].second]++;

    PruneMask out = current;
    for (std::size_t p = 0; p < pieces.size(); ++p) {
        if (quota[p] == 0) continue;
        std::vector<Candidate> cands;
        for (std::size_t i = 0; i < pieces[p].count; ++i)
            if (current.bits[pieces[p].mask_offset + i])
                cands.push_back({std::fabs(params.data[pieces[p].param_offset + i]),
                                 pieces[p].mask_offset + i});
        require(quota[p] <= cands.size(), ErrKind::contract,
                "magnitude_prune: layer budget exceeds survivors in " + pieces[p].name);
        drop_smallest(cands, quota[p], out);
    }
    return out;
}

PruneMask run_imp(const ModelSpec& spec, const ParamVector& theta0, const Dataset& data,
                  const TrainConfig& cfg, const ImpConfig& imp, const CoeffMask* coeff,
                  std::vector<PruneMask>* round_masks) {
    imp.validate();
    PruneMask mask = all_ones_mask(spec);
    if (imp.target_ratio == 0.0) return mask;

    const std::size_t n = mask.size();
    require(n > 0, ErrKind::contract, "run_imp: model has no prunable region");

    const std::size_t rounds = imp.rounds();
    std::size_t zeros = 0;
    for (std::size_t r = 1; r <= rounds; ++r) {
        ParamVector start = apply_mask(theta0, mask);
        ParamVector trained = finetune(spec, start, &mask, coeff, data, cfg);

        std::size_t zeros_target;
        if (imp.budget == ImpConfig::Budget::original) {
            zeros_target = static_cast<std::size_t>(
                std::llround(static_cast<double>(r) * imp.per_round_fraction * static_cast<double>(n)));
        } else {
            const std::size_t alive = n - zeros;
            zeros_target =
                zeros + static_cast<std::size_t>(std::llround(imp.per_round_fraction *
                                                              static_cast<double>(alive)));
            const std::size_t cap =
                static_cast<std::size_t>(std::llround(imp.target_ratio * static_cast<double>(n)));
            zeros_target = std::min(zeros_target, cap);
        }
        const std::size_t k = zeros_target - zeros;
        mask = imp.ranking == ImpConfig::Ranking::global
                   ? magnitude_prune(trained, mask, k)
                   : magnitude_prune_per_layer(trained, mask, k);
        zeros = zeros_target;
        if (round_masks) round_masks->push_back(mask);
    }
    return mask;
}

CoeffMask active_coeff(const std::vector<PruneMask>& previous_masks) {
    require(!previous_masks.empty(), ErrKind::contract,
            "active_coeff: needs at least one previous mask (the first seed trains without one)");
    const std::size_t n = previous_masks.front().size();
    for (const auto& m : previous_masks)
        require(m.size() == n, ErrKind::dimension, "active_coeff: masks not aligned");

    CoeffMask c;
    c.values.assign(n, 0.0);
    for (const auto& m : previous_masks)
        for (std::size_t i = 0; i < n; ++i) c.values[i] += static_cast<double>(m.bits[i]);
    const double inv = 1.0 / static_cast<double>(previous_masks.size());
    for (double& v : c.values) v *= inv;
    return c;
}

CoeffMask random_coeff(std::uint64_t seed, std::size_t n, double target_ratio) {
    require(n > 0, ErrKind::contract, "random_coeff: n must be > 0");
    require(target_ratio >= 0.0 && target_ratio <= 1.0, ErrKind::contract,
            "random_coeff: target_ratio outside [0,1]");
    SeedStream s(seed, Purpose::random_mask);
    CoeffMask c;
    c.values.resize(n);
    // P(entry = 0) equals the target pruning ratio.
    for (double& v : c.values) v = static_cast<double>(s.bernoulli(1.0 - target_ratio));
    return c;
}

double mask_iou(const PruneMask& a, const PruneMask& b) {
    require(a.size() == b.size(), ErrKind::dimension, "mask_iou: masks not aligned");
    std::size_t inter = 0, uni = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        inter += a.bits[i] & b.bits[i];
        uni += a.bits[i] | b.bits[i];
    }
    require(uni > 0, ErrKind::contract, "mask_iou: both masks are all-zero");
    return static_cast<double>(inter) / static_cast<double>(uni);
}

Matrix overlap_matrix(const std::vector<PruneMask>& masks) {
    require(masks.size() >= 2, ErrKind::contract, "overlap_matrix: needs >= 2 masks");
    Matrix m(masks.size(), masks.size());
    for (std::size_t i = 0; i < masks.size(); ++i) {
        m.at(i, i) = 1.0;
        for (std::size_t j = i + 1; j < masks.size(); ++j) {
            const double v = mask_iou(masks[i], masks[j]);
            m.at(i, j) = v;
            m.at(j, i) = v;
        }
    }
    return m;
}

}  // namespace mte
