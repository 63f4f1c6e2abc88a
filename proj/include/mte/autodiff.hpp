#ifndef MTE_AUTODIFF_HPP
#define MTE_AUTODIFF_HPP

#include <cstddef>
#include <string>
#include <vector>

#include "mte/matrix.hpp"
#include "mte/param_vector.hpp"
#include "mte/rng.hpp"

namespace mte {

// Primitive ops recorded on the tape. `add` covers both same-shape addition
// and bias broadcast (param present, 1 x cols).
enum class OpKind {
    input,
    matmul,
    add,
    relu,
    tanh_act,
    elem_mul,
    dropout,
    softmax_xent,
    squared_err,
    l1_term,
};

std::string_view op_name(OpKind k);

struct TapeNode {
    OpKind op;
    int a = -1;
    int b = -1;
    ParamSegment param;      // matmul weight / add bias / l1 target slice
    bool has_param = false;
    Matrix value;
    Matrix grad;             // adjoint, allocated during backward
    Matrix aux;              // dropout mask, probs cache, targets, l1 coeffs
    std::vector<int> labels; // softmax_xent class indices
    double scale = 1.0;      // dropout 1/(1-p); l1 tau
    int layer_index = -1;    // forward-pass layer, for numeric error reports
};

// Record-and-replay tape for one forward pass. Values are computed eagerly as
// nodes are appended (topological order by construction); backward visits the
// nodes exactly once in reverse. The tape borrows `params`, which must stay
// unmodified until backward() has run.
class Tape {
public:
    explicit Tape(const ParamVector* params) : params_(params) {}

    int input(Matrix batch);
    int matmul(int x, const ParamSegment& weight);
    int add_bias(int x, const ParamSegment& bias);
    int add(int x, int y);
    int relu(int x);
    int tanh_act(int x);
    int elem_mul(int x, int y);
    // mask entries are {0,1}; output is x * mask / (1 - p) (inverted dropout).
    int dropout(int x, Matrix mask, double p);
    int softmax_cross_entropy(int logits, std::vector<int> labels);
    // Loss is the row-mean of per-row squared error sums.
    int squared_error(int pred, Matrix targets);
    // tau * sum_i coeff[i] * |theta[i]| over one param slice; coeff aligned
    // with the slice.
    int l1_term(const ParamSegment& slice, std::vector<double> coeff, double tau);

    void set_layer_index(int node, int layer) { nodes_[node].layer_index = layer; }
    void set_loss(int node);
    int loss_node() const { return loss_; }

    const Matrix& value(int node) const { return nodes_[node].value; }
    const std::vector<TapeNode>& nodes() const { return nodes_; }
    const ParamVector& params() const { return *params_; }

    // Returns the gradient of the scalar loss w.r.t. every parameter, in the
    // layout of the borrowed ParamVector.
    ParamVector backward();

private:
    int push(TapeNode node);
    const Matrix& val(int n) const;

    const ParamVector* params_;
    std::vector<TapeNode> nodes_;
    int loss_ = -1;
};

// --- feed-forward net description ----------------------------------------

enum class Act { none, relu, tanh };

struct LayerDef {
    std::string weight;
    std::string bias;
    Act act = Act::none;
    bool dropout = false;  // train-time dropout after the activation
};

struct NetDef {
    std::size_t input_width = 0;
    std::vector<LayerDef> layers;
    double dropout_p = 0.0;
};

struct ForwardPass {
    Tape tape;
    int output_node = -1;

    const Matrix& outputs() const { return tape.value(output_node); }
};

// Runs the net on a batch (rows = samples). When `dropout_stream` is given
// and the layer is flagged, a fresh Bernoulli(1 - p) mask is drawn per call;
// inference passes nullptr and needs no rescaling.
ForwardPass forward(const NetDef& net, const ParamVector& params, const Matrix& batch,
                    SeedStream* dropout_stream = nullptr);

}  // namespace mte

#endif
