#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>

#include "mte/data.hpp"
#include "mte/ensemble.hpp"
#include "mte/model.hpp"
#include "mte/training.hpp"

using namespace mte;

namespace {

ModelSpec tiny_spec() {
    ModelSpec spec;
    spec.body = {{8, Act::relu}, {6, Act::relu}, {6, Act::relu}};
    spec.head = {2, TaskKind::classification};
    spec.dropout_p = 0.0;
    return spec;
}

bool body_bytes_equal(const ParamVector& a, const ParamVector& b) {
    for (const auto& seg : a.segments) {
        if (seg.name == "head.W" || seg.name == "head.b") continue;
        const ParamSegment& other = b.segment(seg.name);
        if (seg.size() != other.size()) return false;
        if (std::memcmp(a.data.data() + seg.offset, b.data.data() + other.offset,
                        seg.size() * sizeof(double)) != 0)
            return false;
    }
    return true;
}

}  // namespace

TEST_CASE("param vector segments cover data exactly and reject duplicates") {
    ParamVector p;
    p.add_segment("a", 2, 3);
    p.add_segment("b", 1, 3);
    CHECK(p.size() == 9);
    CHECK(p.segment("b").offset == 6);
    CHECK_THROWS_AS(p.add_segment("a", 1, 1), Error);
    CHECK_THROWS_AS(p.segment("missing"), Error);
}

TEST_CASE("init_pretrained with zero epochs returns the seeded init unchanged") {
    ModelSpec spec = tiny_spec();
    Dataset source = gen_source_task(3);
    spec.input_width = source.x.cols;

    PretrainConfig pc;
    pc.epochs = 0;
    ParamVector a = init_pretrained(spec, source, 17, pc);
    ParamVector b = init_body_params(spec, 17);
    REQUIRE(a.size() == b.size());
    CHECK(std::memcmp(a.data.data(), b.data.data(), a.size() * sizeof(double)) == 0);
    CHECK(a.find("head.W") == nullptr);
}

TEST_CASE("init_pretrained is deterministic per seed") {
    ModelSpec spec = tiny_spec();
    Dataset source = gen_source_task(3);
    spec.input_width = source.x.cols;

    PretrainConfig pc;
    pc.epochs = 1;
    pc.dropout_p = 0.1;
    ParamVector a = init_pretrained(spec, source, 4, pc);
    ParamVector b = init_pretrained(spec, source, 4, pc);
    REQUIRE(a.size() == b.size());
    CHECK(std::memcmp(a.data.data(), b.data.data(), a.size() * sizeof(double)) == 0);
}

TEST_CASE("attach_head: seeds differ in head only, body bytes identical") {
    ModelSpec spec = tiny_spec();
    ParamVector body = init_body_params(spec, 9);
    ParamVector h1 = attach_head(body, spec, 100);
    ParamVector h2 = attach_head(body, spec, 101);
    ParamVector h1_again = attach_head(body, spec, 100);

    CHECK(body_bytes_equal(h1, h2));
    const ParamSegment& w1 = h1.segment("head.W");
    const ParamSegment& w2 = h2.segment("head.W");
    bool any_diff = false;
    for (std::size_t i = 0; i < w1.size(); ++i)
        if (h1.data[w1.offset + i] != h2.data[w2.offset + i]) any_diff = true;
    CHECK(any_diff);
    CHECK(std::memcmp(h1.data.data(), h1_again.data.data(), h1.size() * sizeof(double)) == 0);

    CHECK_THROWS_AS(attach_head(h1, spec, 5), Error);
}

TEST_CASE("attach_head: empirical head stddev near the configured scale") {
    ModelSpec spec;
    spec.input_width = 16;
    spec.body = {{64, Act::relu}, {64, Act::relu}};
    spec.head = {32, TaskKind::classification};  // 64*32 = 2048 samples
    spec.head_init_std = 0.05;
    ParamVector body = init_body_params(spec, 1);
    ParamVector p = attach_head(body, spec, 2);
    const ParamSegment& w = p.segment("head.W");
    double m = 0.0, m2 = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        m += p.data[w.offset + i];
        m2 += p.data[w.offset + i] * p.data[w.offset + i];
    }
    m /= static_cast<double>(w.size());
    m2 /= static_cast<double>(w.size());
    const double sd = std::sqrt(m2 - m * m);
    CHECK(sd == doctest::Approx(spec.head_init_std).epsilon(0.10));
}

TEST_CASE("prunable region excludes input layer, biases, and head") {
    ModelSpec spec = tiny_spec();
    auto region = prunable_region(spec);
    REQUIRE(region.size() == 2);
    CHECK(region[0] == "body1.W");
    CHECK(region[1] == "body2.W");
    CHECK(prunable_count(spec) == 8 * 6 + 6 * 6);
}

TEST_CASE("apply_mask zeroes exactly the masked-out prunable entries") {
    ModelSpec spec = tiny_spec();
    ParamVector p = attach_head(init_body_params(spec, 7), spec, 7);

    PruneMask ones = all_ones_mask(spec);
    ParamVector same = apply_mask(p, ones);
    CHECK(std::memcmp(same.data.data(), p.data.data(), p.size() * sizeof(double)) == 0);

    PruneMask zeros = ones;
    for (auto& b : zeros.bits) b = 0;
    ParamVector zeroed = apply_mask(p, zeros);
    for (const auto& piece : prunable_layout(zeroed, zeros))
        for (std::size_t i = 0; i < piece.count; ++i)
            CHECK(zeroed.data[piece.param_offset + i] == 0.0);
    // head untouched
    const ParamSegment& hw = zeroed.segment("head.W");
    CHECK(std::memcmp(zeroed.data.data() + hw.offset, p.data.data() + p.segment("head.W").offset,
                      hw.size() * sizeof(double)) == 0);

    // 30% zeros -> exactly floor(0.3 n) zeroed entries in the prunable region
    PruneMask partial = ones;
    const std::size_t k = static_cast<std::size_t>(0.3 * static_cast<double>(partial.size()));
    for (std::size_t i = 0; i < k; ++i) partial.bits[i] = 0;
    ParamVector masked = apply_mask(p, partial);
    std::size_t zero_count = 0;
    for (const auto& piece : prunable_layout(masked, partial))
        for (std::size_t i = 0; i < piece.count; ++i)
            if (masked.data[piece.param_offset + i] == 0.0) ++zero_count;
    CHECK(zero_count == k);

    // misaligned mask
    PruneMask bad = ones;
    bad.bits.pop_back();
    CHECK_THROWS_AS(apply_mask(p, bad), Error);
}

TEST_CASE("apply_mask is idempotent and sparsity matches 1 - mean(mask)") {
    ModelSpec spec = tiny_spec();
    ParamVector p = attach_head(init_body_params(spec, 21), spec, 21);
    PruneMask m = all_ones_mask(spec);
    for (std::size_t i = 0; i < m.bits.size(); i += 3) m.bits[i] = 0;

    ParamVector once = apply_mask(p, m);
    ParamVector twice = apply_mask(once, m);
    CHECK(std::memcmp(once.data.data(), twice.data.data(), once.size() * sizeof(double)) == 0);
    CHECK(mask_applied(once, m));

    std::size_t zeros = 0;
    for (const auto& piece : prunable_layout(once, m))
        for (std::size_t i = 0; i < piece.count; ++i)
            if (once.data[piece.param_offset + i] == 0.0) ++zeros;
    const double sparsity = static_cast<double>(zeros) / static_cast<double>(m.size());
    const double mask_mean =
        static_cast<double>(m.surviving()) / static_cast<double>(m.size());
    CHECK(sparsity == doctest::Approx(1.0 - mask_mean).epsilon(1e-12));
}

TEST_CASE("pretrained body reaches the frozen source-task accuracy bound") {
    // Desk-scale fixture: one small pretrain run, threshold frozen at the
    // 0.90 train-accuracy floor.
    ModelSpec spec;
    spec.body = {{64, Act::relu}, {64, Act::relu}};
    spec.head = {8, TaskKind::classification};
    spec.dropout_p = 0.1;

    Dataset source = gen_source_task(3);
    PretrainConfig pc;
    pc.epochs = 6;
    ParamVector body = init_pretrained(spec, source, 11, pc);

    ParamVector full = attach_head(body, spec, 12);
    TrainConfig tc;
    tc.epochs = 2;
    tc.dropout_p = 0.1;
    tc.seed = 12;
    ParamVector trained = finetune(spec, full, nullptr, nullptr, source, tc);

    Matrix xtrain(source.train_idx.size(), source.x.cols);
    for (std::size_t i = 0; i < source.train_idx.size(); ++i)
        for (std::size_t c = 0; c < source.x.cols; ++c)
            xtrain.at(i, c) = source.x.at(source.train_idx[i], c);
    Matrix probs = predict(spec, trained, xtrain);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < probs.rows; ++i) {
        std::size_t best = 0;
        for (std::size_t j = 1; j < probs.cols; ++j)
            if (probs.at(i, j) > probs.at(i, best)) best = j;
        if (static_cast<int>(best) == source.labels[source.train_idx[i]]) ++correct;
    }
    const double acc = static_cast<double>(correct) / static_cast<double>(probs.rows);
    CHECK(acc >= 0.90);
}
