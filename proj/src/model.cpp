#include "mte/model.hpp"

#include <cmath>

#include "mte/data.hpp"
#include "mte/rng.hpp"
#include "mte/training.hpp"

namespace mte {

void ModelSpec::validate() const {
    require(input_width >= 1, ErrKind::contract, "model: input_width must be >= 1");
    require(!body.empty(), ErrKind::contract, "model: at least one body layer required");
    for (const auto& l : body)
        require(l.width >= 1, ErrKind::contract, "model: body layer width must be >= 1");
    require(head.output_width >= 1, ErrKind::contract, "model: head output width must be >= 1");
    require(dropout_p >= 0.0 && dropout_p < 1.0, ErrKind::contract, "model: dropout_p must be in [0,1)");
    require(head_init_std > 0.0, ErrKind::contract, "model: head_init_std must be > 0");
}

std::string body_weight_name(std::size_t layer) { return "body" + std::to_string(layer) + ".W"; }
std::string body_bias_name(std::size_t layer) { return "body" + std::to_string(layer) + ".b"; }

NetDef full_net(const ModelSpec& spec) {
    spec.validate();
    NetDef net;
    net.input_width = spec.input_width;
    net.dropout_p = spec.dropout_p;
    for (std::size_t i = 0; i < spec.body.size(); ++i)
        net.layers.push_back({body_weight_name(i), body_bias_name(i), spec.body[i].act, true});
    net.layers.push_back({"head.W", "head.b", Act::none, false});
    return net;
}

std::size_t PruneMask::surviving() const {
    std::size_t s = 0;
    for (auto b : bits) s += b;
    return s;
}

std::vector<std::string> prunable_region(const ModelSpec& spec) {
    std::vector<std::string> names;
    for (std::size_t i = 1; i < spec.body.size(); ++i) names.push_back(body_weight_name(i));
    return names;
}

std::size_t prunable_count(const ModelSpec& spec) {
    std::size_t n = 0;
    std::size_t prev = spec.body.empty() ? 0 : spec.body[0].width;
    for (std::size_t i = 1; i < spec.body.size(); ++i) {
        n += prev * spec.body[i].width;
        prev = spec.body[i].width;
    }
    return n;
}

PruneMask all_ones_mask(const ModelSpec& spec) {
    PruneMask m;
    m.region = prunable_region(spec);
    m.bits.assign(prunable_count(spec), 1);
    return m;
}

std::vector<PrunablePiece> prunable_layout(const ParamVector& params, const PruneMask& mask) {
    std::vector<PrunablePiece> pieces;
    std::size_t mask_off = 0;
    for (const auto& name : mask.region) {
        const ParamSegment& seg = params.segment(name);
        pieces.push_back({name, seg.offset, mask_off, seg.size()});
        mask_off += seg.size();
    }
    require(mask_off == mask.bits.size(), ErrKind::dimension,
            "mask misaligned: region covers " + std::to_string(mask_off) + " weights, mask has " +
                std::to_string(mask.bits.size()) + " bits");
    return pieces;
}

namespace {

void init_layer(ParamVector& p, const std::string& wname, const std::string& bname,
                std::size_t fan_in, std::size_t fan_out, double stddev, SeedStream& s) {
    ParamSegment& w = p.add_segment(wname, fan_in, fan_out);
    for (std::size_t i = 0; i < w.size(); ++i) p.data[w.offset + i] = stddev * s.normal();
    p.add_segment(bname, 1, fan_out);  // biases start at zero
}

}  // namespace

ParamVector init_body_params(const ModelSpec& spec, std::uint64_t seed) {
    spec.validate();
    SeedStream s(seed, Purpose::head_init);
    ParamVector p;
    std::size_t prev = spec.input_width;
    for (std::size_t i = 0; i < spec.body.size(); ++i) {
        const double stddev = std::sqrt(2.0 / static_cast<double>(prev));
        init_layer(p, body_weight_name(i), body_bias_name(i), prev, spec.body[i].width, stddev, s);
        prev = spec.body[i].width;
    }
    return p;
}

ParamVector attach_head(const ParamVector& body, const ModelSpec& spec, std::uint64_t seed) {
    require(body.find("head.W") == nullptr && body.find("head.b") == nullptr, ErrKind::contract,
            "attach_head: head already present");
    require(!spec.body.empty(), ErrKind::contract, "attach_head: empty body spec");
    ParamVector p = body;
    SeedStream s(seed, Purpose::head_init);
    init_layer(p, "head.W", "head.b", spec.body.back().width, spec.head.output_width,
               spec.head_init_std, s);
    return p;
}

ParamVector apply_mask(const ParamVector& params, const PruneMask& mask) {
    ParamVector out = params;
    for (const auto& piece : prunable_layout(params, mask)) {
        for (std::size_t i = 0; i < piece.count; ++i)
            if (!mask.bits[piece.mask_offset + i]) out.data[piece.param_offset + i] = 0.0;
    }
    return out;
}

bool mask_applied(const ParamVector& params, const PruneMask& mask) {
    for (const auto& piece : prunable_layout(params, mask)) {
        for (std::size_t i = 0; i < piece.count; ++i)
            if (!mask.bits[piece.mask_offset + i] && params.data[piece.param_offset + i] != 0.0)
                return false;
    }
    return true;
}

ParamVector init_pretrained(const ModelSpec& spec, const Dataset& source, std::uint64_t seed,
                            const PretrainConfig& cfg) {
    require(source.x.cols == spec.input_width, ErrKind::dimension,
            "init_pretrained: source task width differs from model input width");
    require(source.kind == TaskKind::classification, ErrKind::contract,
            "init_pretrained: source task must be classification");

    ModelSpec pre = spec;
    pre.head = {source.classes, TaskKind::classification};
    pre.dropout_p = cfg.dropout_p;

    ParamVector body = init_body_params(pre, seed);
    if (cfg.epochs == 0) return body;

    ParamVector full = attach_head(body, pre, seed);
    TrainConfig tc;
    tc.epochs = cfg.epochs;
    tc.lr0 = cfg.lr0;
    tc.batch_size = cfg.batch_size;
    tc.dropout_p = cfg.dropout_p;
    tc.seed = seed;
    ParamVector trained = finetune(pre, full, nullptr, nullptr, source, tc);

    // Strip the throwaway head; the body segments are a prefix of the layout.
    ParamVector out;
    for (const auto& seg : trained.segments) {
        if (seg.name == "head.W" || seg.name == "head.b") continue;
        ParamSegment& s = out.add_segment(seg.name, seg.rows, seg.cols);
        for (std::size_t i = 0; i < seg.size(); ++i) out.data[s.offset + i] = trained.data[seg.offset + i];
    }
    return out;
}

}  // namespace mte
