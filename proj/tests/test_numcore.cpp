#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>

#include "mte/autodiff.hpp"
#include "mte/rng.hpp"

using namespace mte;

namespace {

Matrix from_rows(std::size_t rows, std::size_t cols, std::initializer_list<double> vals) {
    Matrix m(rows, cols);
    std::size_t i = 0;
    for (double v : vals) m.data[i++] = v;
    return m;
}

ParamVector random_params(const std::vector<std::tuple<std::string, std::size_t, std::size_t>>& segs,
                          SeedStream& s, double scale = 0.5) {
    ParamVector p;
    for (const auto& [name, r, c] : segs) {
        p.add_segment(name, r, c);
        const ParamSegment& seg = p.segment(name);
        for (std::size_t i = 0; i < seg.size(); ++i) p.data[seg.offset + i] = scale * s.normal();
    }
    return p;
}

// Builds a 2-layer net loss tape for the gradient checks; classification or
// regression selected by `xent`.
double net_loss(const NetDef& net, const ParamVector& params, const Matrix& batch,
                const std::vector<int>& labels, const Matrix& targets, bool xent,
                ParamVector* grad_out = nullptr) {
    ForwardPass fp = forward(net, params, batch, nullptr);
    int loss = xent ? fp.tape.softmax_cross_entropy(fp.output_node, labels)
                    : fp.tape.squared_error(fp.output_node, targets);
    fp.tape.set_loss(loss);
    const double v = fp.tape.value(loss).data[0];
    if (grad_out) *grad_out = fp.tape.backward();
    return v;
}

// Central finite differences, h = 1e-5 at real64.
ParamVector finite_diff(const NetDef& net, ParamVector params, const Matrix& batch,
                        const std::vector<int>& labels, const Matrix& targets, bool xent) {
    constexpr double h = 1e-5;
    ParamVector g;
    g.segments = params.segments;
    g.data.assign(params.data.size(), 0.0);
    for (std::size_t i = 0; i < params.data.size(); ++i) {
        const double orig = params.data[i];
        params.data[i] = orig + h;
        const double up = net_loss(net, params, batch, labels, targets, xent);
        params.data[i] = orig - h;
        const double down = net_loss(net, params, batch, labels, targets, xent);
        params.data[i] = orig;
        g.data[i] = (up - down) / (2.0 * h);
    }
    return g;
}

double max_rel_err(const ParamVector& a, const ParamVector& b) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        const double denom = std::max({std::fabs(a.data[i]), std::fabs(b.data[i]), 1e-4});
        worst = std::max(worst, std::fabs(a.data[i] - b.data[i]) / denom);
    }
    return worst;
}

}  // namespace

TEST_CASE("seed stream determinism and purpose separation") {
    SeedStream a(42, Purpose::shuffle);
    SeedStream b(42, Purpose::shuffle);
    for (int i = 0; i < 1000; ++i) CHECK(a.next_u64() == b.next_u64());

    SeedStream c(42, Purpose::dropout);
    SeedStream d(42, Purpose::shuffle);
    int same = 0;
    for (int i = 0; i < 1000; ++i)
        if (c.next_u64() == d.next_u64()) ++same;
    CHECK(same == 0);

    SeedStream e(43, Purpose::shuffle);
    SeedStream f(42, Purpose::shuffle);
    same = 0;
    for (int i = 0; i < 1000; ++i)
        if (e.next_u64() == f.next_u64()) ++same;
    CHECK(same == 0);
}

TEST_CASE("bernoulli draws") {
    SeedStream s(7, Purpose::random_mask);
    auto zeros = s.bernoulli_vec(100, 0.0);
    for (auto v : zeros) CHECK(v == 0);
    auto ones = s.bernoulli_vec(100, 1.0);
    for (auto v : ones) CHECK(v == 1);

    auto big = s.bernoulli_vec(100000, 0.3);
    double mean = 0.0;
    for (auto v : big) mean += v;
    mean /= 100000.0;
    CHECK(mean == doctest::Approx(0.3).epsilon(0.034));  // 0.3 +/- 0.01 absolute

    CHECK_THROWS_AS(s.bernoulli(1.5), Error);
    CHECK_THROWS_AS(s.bernoulli(-0.1), Error);
}

TEST_CASE("uniform and normal moments") {
    SeedStream s(11, Purpose::data_gen);
    double mean = 0.0, mean2 = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        const double v = s.normal();
        mean += v;
        mean2 += v * v;
    }
    mean /= n;
    mean2 /= n;
    CHECK(std::fabs(mean) < 0.01);
    CHECK(mean2 == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("forward identity and single linear layer") {
    // identity 1-layer linear net: W = I, b = 0
    ParamVector p;
    p.add_segment("w.W", 2, 2);
    p.data[0] = 1.0;
    p.data[3] = 1.0;
    p.add_segment("w.b", 1, 2);
    NetDef net{2, {{"w.W", "w.b", Act::none, false}}, 0.0};

    Matrix x = from_rows(2, 2, {3.0, -1.0, 0.5, 2.0});
    ForwardPass fp = forward(net, p, x);
    for (std::size_t i = 0; i < x.data.size(); ++i) CHECK(fp.outputs().data[i] == x.data[i]);

    // W = [[2]], b = [1], x = [3] -> [7]
    ParamVector q;
    q.add_segment("w.W", 1, 1);
    q.data[0] = 2.0;
    q.add_segment("w.b", 1, 1);
    q.data[1] = 1.0;
    NetDef net1{1, {{"w.W", "w.b", Act::none, false}}, 0.0};
    ForwardPass fp1 = forward(net1, q, from_rows(1, 1, {3.0}));
    CHECK(fp1.outputs().data[0] == 7.0);
}

TEST_CASE("forward 2-layer relu net matches hand evaluation") {
    // x = [1, -2]; W1 = [[1, 0.5], [-1, 2]]; b1 = [0.5, -1]
    // pre1 = [1*1 + -2*-1, 1*0.5 + -2*2] + b1 = [3.5, -4.5]; relu -> [3.5, 0]
    // W2 = [[2], [1]]; b2 = [0.25]; out = 3.5*2 + 0*1 + 0.25 = 7.25
    ParamVector p;
    p.add_segment("l0.W", 2, 2);
    p.data[0] = 1.0;
    p.data[1] = 0.5;
    p.data[2] = -1.0;
    p.data[3] = 2.0;
    p.add_segment("l0.b", 1, 2);
    p.data[4] = 0.5;
    p.data[5] = -1.0;
    p.add_segment("l1.W", 2, 1);
    p.data[6] = 2.0;
    p.data[7] = 1.0;
    p.add_segment("l1.b", 1, 1);
    p.data[8] = 0.25;
    NetDef net{2, {{"l0.W", "l0.b", Act::relu, false}, {"l1.W", "l1.b", Act::none, false}}, 0.0};
    ForwardPass fp = forward(net, p, from_rows(1, 2, {1.0, -2.0}));
    CHECK(fp.outputs().data[0] == doctest::Approx(7.25).epsilon(1e-15));
}

TEST_CASE("forward errors: shape mismatch and non-finite") {
    ParamVector p;
    p.add_segment("w.W", 2, 2);
    p.add_segment("w.b", 1, 2);
    NetDef net{2, {{"w.W", "w.b", Act::none, false}}, 0.0};
    CHECK_THROWS_AS(forward(net, p, Matrix(1, 3)), Error);

    p.data[0] = 1e308;
    p.data[1] = 1e308;
    Matrix x = from_rows(1, 2, {1e308, 1e308});
    try {
        forward(net, p, x);
        FAIL("expected numeric error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrKind::numeric);
        CHECK(std::string(e.what()).find("layer 0") != std::string::npos);
    }
}

TEST_CASE("backward: loss = theta^2 at theta = 3 gives gradient 6") {
    ParamVector p;
    p.add_segment("w.W", 1, 1);
    p.data[0] = 3.0;
    Tape tape(&p);
    int x = tape.input(from_rows(1, 1, {1.0}));
    int y = tape.matmul(x, p.segment("w.W"));
    int loss = tape.squared_error(y, Matrix(1, 1));
    tape.set_loss(loss);
    CHECK(tape.value(loss).data[0] == 9.0);
    ParamVector g = tape.backward();
    CHECK(g.data[0] == 6.0);
}

TEST_CASE("backward: masked L1 subgradient") {
    ParamVector p;
    p.add_segment("w.W", 1, 2);
    p.data[0] = 2.0;
    p.data[1] = -3.0;
    Tape tape(&p);
    int t = tape.l1_term(p.segment("w.W"), {1.0, 0.0}, 1.0);
    tape.set_loss(t);
    CHECK(tape.value(t).data[0] == 2.0);  // |2|*1 + |-3|*0
    ParamVector g = tape.backward();
    CHECK(g.data[0] == 1.0);
    CHECK(g.data[1] == 0.0);

    // subgradient at exactly 0 is defined as 0
    p.data[0] = 0.0;
    Tape tape2(&p);
    int t2 = tape2.l1_term(p.segment("w.W"), {1.0, 1.0}, 2.0);
    tape2.set_loss(t2);
    ParamVector g2 = tape2.backward();
    CHECK(g2.data[0] == 0.0);
    CHECK(g2.data[1] == -2.0);
}

TEST_CASE("backward requires a scalar loss root") {
    ParamVector p;
    p.add_segment("w.W", 2, 2);
    Tape tape(&p);
    int x = tape.input(Matrix(1, 2));
    int y = tape.matmul(x, p.segment("w.W"));
    CHECK_THROWS_AS(tape.set_loss(y), Error);
    CHECK_THROWS_AS(tape.backward(), Error);
}

TEST_CASE("gradient oracle: random 2-layer nets vs central differences") {
    SeedStream s(2024, Purpose::data_gen);
    // >= 100 random instances across both loss kinds; rel err < 1e-6
    for (int inst = 0; inst < 60; ++inst) {
        const std::size_t in = 2 + static_cast<std::size_t>(s.below(3));
        const std::size_t hidden = 2 + static_cast<std::size_t>(s.below(4));
        const std::size_t out = 2 + static_cast<std::size_t>(s.below(3));
        const std::size_t batch = 1 + static_cast<std::size_t>(s.below(4));
        const Act act = inst % 2 == 0 ? Act::relu : Act::tanh;

        ParamVector p = random_params(
            {{"l0.W", in, hidden}, {"l0.b", 1, hidden}, {"l1.W", hidden, out}, {"l1.b", 1, out}}, s);
        NetDef net{in, {{"l0.W", "l0.b", act, false}, {"l1.W", "l1.b", Act::none, false}}, 0.0};

        Matrix x(batch, in);
        for (auto& v : x.data) v = s.normal();
        std::vector<int> labels(batch);
        for (auto& l : labels) l = static_cast<int>(s.below(out));
        Matrix targets(batch, out);
        for (auto& v : targets.data) v = s.normal();

        const bool xent = inst % 2 == 0;
        ParamVector g;
        net_loss(net, p, x, labels, targets, xent, &g);
        ParamVector fd = finite_diff(net, p, x, labels, targets, xent);
        CHECK(max_rel_err(g, fd) < 1e-6);
    }
}

TEST_CASE("gradient oracle: elementwise-mul and dropout primitives") {
    SeedStream s(77, Purpose::data_gen);
    for (int inst = 0; inst < 40; ++inst) {
        ParamVector p = random_params({{"a.W", 2, 3}, {"a.b", 1, 3}}, s);
        Matrix x(2, 2);
        for (auto& v : x.data) v = s.normal();
        Matrix mask(2, 3);
        for (auto& v : mask.data) v = s.below(2) ? 1.0 : 0.0;
        Matrix targets(2, 3);
        for (auto& v : targets.data) v = s.normal();

        auto loss_of = [&](const ParamVector& params, ParamVector* grad) {
            Tape tape(&params);
            int xin = tape.input(x);
            int h = tape.add_bias(tape.matmul(xin, params.segment("a.W")), params.segment("a.b"));
            int t = tape.tanh_act(h);
            int drop = tape.dropout(t, mask, 0.25);
            int mul = tape.elem_mul(drop, t);
            int loss = tape.squared_error(mul, targets);
            tape.set_loss(loss);
            if (grad) *grad = tape.backward();
            return tape.value(loss).data[0];
        };

        ParamVector g;
        loss_of(p, &g);
        constexpr double h = 1e-5;
        ParamVector fd;
        fd.segments = p.segments;
        fd.data.assign(p.data.size(), 0.0);
        for (std::size_t i = 0; i < p.data.size(); ++i) {
            ParamVector q = p;
            q.data[i] = p.data[i] + h;
            const double up = loss_of(q, nullptr);
            q.data[i] = p.data[i] - h;
            const double down = loss_of(q, nullptr);
            fd.data[i] = (up - down) / (2.0 * h);
        }
        CHECK(max_rel_err(g, fd) < 1e-6);
    }
}

TEST_CASE("gradient oracle: l1 term joint with task loss") {
    SeedStream s(99, Purpose::data_gen);
    for (int inst = 0; inst < 20; ++inst) {
        ParamVector p = random_params({{"a.W", 3, 2}, {"a.b", 1, 2}}, s);
        // keep weights away from the |.| kink so central differences are valid
        for (auto& v : p.data)
            if (std::fabs(v) < 0.05) v = v < 0 ? v - 0.1 : v + 0.1;
        Matrix x(2, 3);
        for (auto& v : x.data) v = s.normal();
        std::vector<int> labels = {static_cast<int>(s.below(2)), static_cast<int>(s.below(2))};
        std::vector<double> coeff(6);
        for (auto& c : coeff) c = s.uniform();

        auto loss_of = [&](const ParamVector& params, ParamVector* grad) {
            Tape tape(&params);
            int xin = tape.input(x);
            int h = tape.add_bias(tape.matmul(xin, params.segment("a.W")), params.segment("a.b"));
            int loss = tape.softmax_cross_entropy(h, labels);
            int l1 = tape.l1_term(params.segment("a.W"), coeff, 0.37);
            loss = tape.add(loss, l1);
            tape.set_loss(loss);
            if (grad) *grad = tape.backward();
            return tape.value(loss).data[0];
        };

        ParamVector g;
        loss_of(p, &g);
        constexpr double h = 1e-5;
        ParamVector fd;
        fd.segments = p.segments;
        fd.data.assign(p.data.size(), 0.0);
        for (std::size_t i = 0; i < p.data.size(); ++i) {
            ParamVector q = p;
            q.data[i] = p.data[i] + h;
            const double up = loss_of(q, nullptr);
            q.data[i] = p.data[i] - h;
            const double down = loss_of(q, nullptr);
            fd.data[i] = (up - down) / (2.0 * h);
        }
        CHECK(max_rel_err(g, fd) < 1e-6);
    }
}

TEST_CASE("backward linearity: grad of summed losses equals summed grads") {
    SeedStream s(5, Purpose::data_gen);
    ParamVector p = random_params({{"a.W", 2, 2}, {"a.b", 1, 2}}, s);
    Matrix x(3, 2);
    for (auto& v : x.data) v = s.normal();
    Matrix t1(3, 2), t2(3, 2);
    for (auto& v : t1.data) v = s.normal();
    for (auto& v : t2.data) v = s.normal();

    auto grad_single = [&](const Matrix& t) {
        Tape tape(&p);
        int h = tape.add_bias(tape.matmul(tape.input(x), p.segment("a.W")), p.segment("a.b"));
        int loss = tape.squared_error(h, t);
        tape.set_loss(loss);
        return tape.backward();
    };
    ParamVector g1 = grad_single(t1);
    ParamVector g2 = grad_single(t2);

    Tape tape(&p);
    int h = tape.add_bias(tape.matmul(tape.input(x), p.segment("a.W")), p.segment("a.b"));
    int l1 = tape.squared_error(h, t1);
    // second branch reuses the same activation node
    int l2 = tape.squared_error(h, t2);
    int loss = tape.add(l1, l2);
    tape.set_loss(loss);
    ParamVector g12 = tape.backward();

    for (std::size_t i = 0; i < p.data.size(); ++i)
        CHECK(g12.data[i] == doctest::Approx(g1.data[i] + g2.data[i]).epsilon(1e-12));
}
