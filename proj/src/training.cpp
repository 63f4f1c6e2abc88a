#include "mte/training.hpp"

#include <cmath>

#include "mte/rng.hpp"

namespace mte {

void TrainConfig::validate() const {
    require(epochs >= 1, ErrKind::contract, "train: epochs must be >= 1");
    require(lr0 >= 0.0 && std::isfinite(lr0), ErrKind::contract, "train: lr0 must be finite and >= 0");
    require(batch_size >= 1, ErrKind::contract, "train: batch_size must be >= 1");
    require(dropout_p >= 0.0 && dropout_p < 1.0, ErrKind::contract, "train: dropout_p must be in [0,1)");
    require(tau >= 0.0, ErrKind::contract, "train: tau must be >= 0");
}

double lr_at(const LrSchedule& s, std::size_t step) {
    require(s.total_steps >= 1, ErrKind::contract, "lr_at: empty schedule");
    require(step <= s.total_steps, ErrKind::contract, "lr_at: step past end of schedule");
    return s.lr0 * (1.0 - static_cast<double>(step) / static_cast<double>(s.total_steps));
}

double tau_at(double tau0, const LrSchedule& s, std::size_t step) {
    require(s.total_steps >= 1, ErrKind::contract, "tau_at: empty schedule");
    require(step <= s.total_steps, ErrKind::contract, "tau_at: step past end of schedule");
    return tau0 * (1.0 - static_cast<double>(step) / static_cast<double>(s.total_steps));
}

Dataset bag_subset(const Dataset& data, std::uint64_t seed) {
    const std::size_t n = data.train_idx.size();
    require(n >= 10, ErrKind::contract, "bag_subset: train split must have >= 10 examples");
    const std::size_t m = static_cast<std::size_t>(0.9 * static_cast<double>(n));

    SeedStream s(seed, Purpose::bag_subset);
    std::vector<std::size_t> pool = data.train_idx;
    for (std::size_t i = 0; i < m; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(s.below(n - i));
        std::swap(pool[i], pool[j]);
    }
    pool.resize(m);

    Dataset out = data;
    out.train_idx = std::move(pool);
    return out;
}

namespace {

struct CoeffPiece {
    ParamSegment seg;
    std::size_t mask_offset;
};

Matrix gather_rows(const Matrix& x, const std::vector<std::size_t>& order, std::size_t begin,
                   std::size_t end) {
    Matrix out(end - begin, x.cols);
    for (std::size_t r = begin; r < end; ++r) {
        const double* src = x.row(order[r]);
        double* dst = out.row(r - begin);
        for (std::size_t c = 0; c < x.cols; ++c) dst[c] = src[c];
    }
    return out;
}

}  // namespace

ParamVector finetune(const ModelSpec& spec, const ParamVector& init, const PruneMask* mask,
                     const CoeffMask* coeff, const Dataset& data, const TrainConfig& cfg,
                     const StepObserver& observer) {
    spec.validate();
    cfg.validate();
    require(!data.train_idx.empty(), ErrKind::contract, "finetune: empty train split");
    require(data.kind == spec.head.kind, ErrKind::contract, "finetune: task kind differs from head");
    if (data.kind == TaskKind::classification)
        require(data.classes == spec.head.output_width, ErrKind::dimension,
                "finetune: head width differs from class count");
    else
        require(spec.head.output_width == 1, ErrKind::dimension,
                "finetune: regression head must have width 1");
    if (mask != nullptr)
        require(mask_applied(init, *mask), ErrKind::contract,
                "finetune: init params must already be mask-applied");

    // Resolve the prunable region once; both the gradient masking and the L1
    // terms walk these pieces.
    std::vector<CoeffPiece> pieces;
    {
        std::size_t off = 0;
        for (const auto& name : prunable_region(spec)) {
            const ParamSegment& seg = init.segment(name);
            pieces.push_back({seg, off});
            off += seg.size();
        }
        if (mask != nullptr)
            require(off == mask->bits.size(), ErrKind::dimension, "finetune: mask misaligned");
        if (coeff != nullptr)
            require(off == coeff->values.size(), ErrKind::dimension, "finetune: coeff mask misaligned");
    }
    const bool l1_active = coeff != nullptr && cfg.tau > 0.0;

    NetDef net = full_net(spec);
    net.dropout_p = cfg.dropout_p;

    SeedStream shuffle_stream(cfg.seed, Purpose::shuffle);
    SeedStream dropout_stream(cfg.seed, Purpose::dropout);

    const std::size_t n = data.train_idx.size();
    const std::size_t steps_per_epoch = (n + cfg.batch_size - 1) / cfg.batch_size;
    const LrSchedule sched{cfg.lr0, cfg.epochs * steps_per_epoch};

    ParamVector params = init;
    std::vector<std::size_t> order = data.train_idx;
    std::size_t step = 0;

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        shuffle_stream.shuffle(order);
        for (std::size_t begin = 0; begin < n; begin += cfg.batch_size) {
            const std::size_t end = std::min(begin + cfg.batch_size, n);
            Matrix xb = gather_rows(data.x, order, begin, end);

            ForwardPass fp = forward(net, params, xb, cfg.dropout_p > 0.0 ? &dropout_stream : nullptr);
            int loss;
            if (data.kind == TaskKind::classification) {
                std::vector<int> yb(end - begin);
                for (std::size_t r = begin; r < end; ++r) yb[r - begin] = data.labels[order[r]];
                loss = fp.tape.softmax_cross_entropy(fp.output_node, std::move(yb));
            } else {
                Matrix tb(end - begin, 1);
                for (std::size_t r = begin; r < end; ++r) tb.data[r - begin] = data.targets[order[r]];
                loss = fp.tape.squared_error(fp.output_node, std::move(tb));
            }
            if (l1_active) {
                const double tau_t = tau_at(cfg.tau, sched, step);
                for (const auto& piece : pieces) {
                    std::vector<double> cslice(coeff->values.begin() +
                                                   static_cast<std::ptrdiff_t>(piece.mask_offset),
                                               coeff->values.begin() +
                                                   static_cast<std::ptrdiff_t>(piece.mask_offset +
                                                                               piece.seg.size()));
                    loss = fp.tape.add(loss, fp.tape.l1_term(piece.seg, std::move(cslice), tau_t));
                }
            }
            fp.tape.set_loss(loss);
            require(std::isfinite(fp.tape.value(loss).data[0]), ErrKind::numeric,
                    "finetune: non-finite loss at step " + std::to_string(step));

            ParamVector grad = fp.tape.backward();
            if (mask != nullptr) {
                for (const auto& piece : pieces) {
                    double* g = grad.data.data() + piece.seg.offset;
                    const std::uint8_t* bits = mask->bits.data() + piece.mask_offset;
                    for (std::size_t i = 0; i < piece.seg.size(); ++i)
                        if (!bits[i]) g[i] = 0.0;
                }
            }
            const double lr = lr_at(sched, step);
            for (std::size_t i = 0; i < params.data.size(); ++i)
                params.data[i] -= lr * grad.data[i];

            ++step;
            if (observer) observer(step, params);
        }
    }
    return params;
}

}  // namespace mte
