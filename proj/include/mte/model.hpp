#ifndef MTE_MODEL_HPP
#define MTE_MODEL_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "mte/autodiff.hpp"
#include "mte/param_vector.hpp"

namespace mte {

enum class TaskKind { classification, regression };

struct BodyLayer {
    std::size_t width = 0;
    Act act = Act::relu;
};

struct HeadSpec {
    std::size_t output_width = 1;
    TaskKind kind = TaskKind::classification;
};

// Feed-forward net with a frozen-architecture body shared by all ensemble
// members and a per-seed task head. Segment names: body<i>.W / body<i>.b and
// head.W / head.b.
struct ModelSpec {
    std::size_t input_width = 16;
    std::vector<BodyLayer> body{{256, Act::relu}, {256, Act::relu}, {256, Act::relu}};
    HeadSpec head{2, TaskKind::classification};
    double dropout_p = 0.1;
    double head_init_std = 0.05;

    void validate() const;
};

std::string body_weight_name(std::size_t layer);
std::string body_bias_name(std::size_t layer);

// Full net: all body layers (activation + train-time dropout) plus a linear
// head.
NetDef full_net(const ModelSpec& spec);

// Binary vector over the prunable parameters, 1 = surviving. The prunable
// region is the ordered set of hidden body weight matrices: the input layer
// (body0), all biases, and the task head are never pruned.
struct PruneMask {
    std::vector<std::uint8_t> bits;
    std::vector<std::string> region;

    std::size_t size() const { return bits.size(); }
    std::size_t surviving() const;
    std::size_t pruned() const { return bits.size() - surviving(); }
};

std::vector<std::string> prunable_region(const ModelSpec& spec);
std::size_t prunable_count(const ModelSpec& spec);
PruneMask all_ones_mask(const ModelSpec& spec);

// Maps each prunable segment onto its slice of the mask bit vector.
struct PrunablePiece {
    std::string name;
    std::size_t param_offset = 0;
    std::size_t mask_offset = 0;
    std::size_t count = 0;
};

std::vector<PrunablePiece> prunable_layout(const ParamVector& params, const PruneMask& mask);

// Fresh body parameters (He-scaled normal weights, zero biases) drawn from
// the head-init stream of `seed`. No head segments.
ParamVector init_body_params(const ModelSpec& spec, std::uint64_t seed);

// Copies `body` and appends a head drawn from the head-init stream of `seed`
// (normal with stddev spec.head_init_std, zero bias). Body bytes unchanged.
ParamVector attach_head(const ParamVector& body, const ModelSpec& spec, std::uint64_t seed);

// Returns params with masked-out prunable entries set to exactly 0.0.
ParamVector apply_mask(const ParamVector& params, const PruneMask& mask);

bool mask_applied(const ParamVector& params, const PruneMask& mask);

struct Dataset;  // data.hpp

struct PretrainConfig {
    std::size_t epochs = 12;
    double lr0 = 0.05;
    std::size_t batch_size = 32;
    double dropout_p = 0.1;
};

// Trains a body on the source task with a throwaway head and returns the body
// segments only: the shared starting point every member finetunes from.
// epochs = 0 returns the seeded random initialization unchanged.
ParamVector init_pretrained(const ModelSpec& spec, const Dataset& source, std::uint64_t seed,
                            const PretrainConfig& cfg = {});

}  // namespace mte

#endif
