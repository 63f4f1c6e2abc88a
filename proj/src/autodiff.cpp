#include "mte/autodiff.hpp"

#include <cmath>

namespace mte {

std::string_view op_name(OpKind k) {
    switch (k) {
        case OpKind::input: return "input";
        case OpKind::matmul: return "matmul";
        case OpKind::add: return "add";
        case OpKind::relu: return "relu";
        case OpKind::tanh_act: return "tanh";
        case OpKind::elem_mul: return "elementwise-mul";
        case OpKind::dropout: return "dropout-mask-apply";
        case OpKind::softmax_xent: return "softmax-cross-entropy";
        case OpKind::squared_err: return "squared-error";
        case OpKind::l1_term: return "l1-term";
    }
    return "?";
}

namespace {

// raw[k x m] += A^T * B. A is n x k, B is n x m.
void at_b_accum_raw(double* raw, const Matrix& a, const Matrix& b) {
    for (std::size_t i = 0; i < a.rows; ++i) {
        const double* arow = a.row(i);
        const double* brow = b.row(i);
        for (std::size_t k = 0; k < a.cols; ++k) {
            const double av = arow[k];
            double* orow = raw + k * b.cols;
            for (std::size_t j = 0; j < b.cols; ++j) orow[j] = std::fma(av, brow[j], orow[j]);
        }
    }
}

double sign_of(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

}  // namespace

const Matrix& Tape::val(int n) const { return nodes_[static_cast<std::size_t>(n)].value; }

int Tape::push(TapeNode node) {
    nodes_.push_back(std::move(node));
    return static_cast<int>(nodes_.size()) - 1;
}

int Tape::input(Matrix batch) {
    TapeNode n;
    n.op = OpKind::input;
    n.value = std::move(batch);
    return push(std::move(n));
}

int Tape::matmul(int x, const ParamSegment& weight) {
    const Matrix& xv = val(x);
    require(xv.cols == weight.rows, ErrKind::dimension,
            "matmul: input width " + std::to_string(xv.cols) + " != fan-in of " + weight.name);
    TapeNode n;
    n.op = OpKind::matmul;
    n.a = x;
    n.param = weight;
    n.has_param = true;
    n.value.rows = xv.rows;
    n.value.cols = weight.cols;
    n.value.data.assign(xv.rows * weight.cols, 0.0);
    const double* w = params_->data.data() + weight.offset;
    for (std::size_t i = 0; i < xv.rows; ++i) {
        const double* xr = xv.row(i);
        double* orow = n.value.row(i);
        for (std::size_t k = 0; k < xv.cols; ++k) {
            const double xk = xr[k];
            const double* wrow = w + k * weight.cols;
            for (std::size_t j = 0; j < weight.cols; ++j) orow[j] = std::fma(xk, wrow[j], orow[j]);
        }
    }
    return push(std::move(n));
}

int Tape::add_bias(int x, const ParamSegment& bias) {
    const Matrix& xv = val(x);
    require(bias.rows == 1 && bias.cols == xv.cols, ErrKind::dimension,
            "add: bias " + bias.name + " does not match activation width");
    TapeNode n;
    n.op = OpKind::add;
    n.a = x;
    n.param = bias;
    n.has_param = true;
    n.value = xv;
    const double* b = params_->data.data() + bias.offset;
    for (std::size_t i = 0; i < n.value.rows; ++i) {
        double* row = n.value.row(i);
        for (std::size_t j = 0; j < n.value.cols; ++j) row[j] += b[j];
    }
    return push(std::move(n));
}

int Tape::add(int x, int y) {
    const Matrix& xv = val(x);
    const Matrix& yv = val(y);
    require(xv.same_shape(yv), ErrKind::dimension, "add: operand shapes differ");
    TapeNode n;
    n.op = OpKind::add;
    n.a = x;
    n.b = y;
    n.value = xv;
    for (std::size_t i = 0; i < n.value.data.size(); ++i) n.value.data[i] += yv.data[i];
    return push(std::move(n));
}

int Tape::relu(int x) {
    TapeNode n;
    n.op = OpKind::relu;
    n.a = x;
    n.value = val(x);
    for (double& v : n.value.data) v = v > 0.0 ? v : 0.0;
    return push(std::move(n));
}

int Tape::tanh_act(int x) {
    TapeNode n;
    n.op = OpKind::tanh_act;
    n.a = x;
    n.value = val(x);
    for (double& v : n.value.data) v = std::tanh(v);
    return push(std::move(n));
}

int Tape::elem_mul(int x, int y) {
    const Matrix& xv = val(x);
    const Matrix& yv = val(y);
    require(xv.same_shape(yv), ErrKind::dimension, "elementwise-mul: operand shapes differ");
    TapeNode n;
    n.op = OpKind::elem_mul;
    n.a = x;
    n.b = y;
    n.value = xv;
    for (std::size_t i = 0; i < n.value.data.size(); ++i) n.value.data[i] *= yv.data[i];
    return push(std::move(n));
}

int Tape::dropout(int x, Matrix mask, double p) {
    const Matrix& xv = val(x);
    require(mask.same_shape(xv), ErrKind::dimension, "dropout: mask shape differs from input");
    require(p >= 0.0 && p < 1.0, ErrKind::contract, "dropout: p must be in [0,1)");
    TapeNode n;
    n.op = OpKind::dropout;
    n.a = x;
    n.scale = 1.0 / (1.0 - p);
    n.aux = std::move(mask);
    n.value = xv;
    for (std::size_t i = 0; i < n.value.data.size(); ++i) n.value.data[i] *= n.aux.data[i] * n.scale;
    return push(std::move(n));
}

int Tape::softmax_cross_entropy(int logits, std::vector<int> labels) {
    const Matrix& z = val(logits);
    require(labels.size() == z.rows, ErrKind::dimension, "softmax-cross-entropy: one label per row required");
    TapeNode n;
    n.op = OpKind::softmax_xent;
    n.a = logits;
    n.labels = std::move(labels);
    n.aux = Matrix(z.rows, z.cols);  // cached probabilities for backward
    double total = 0.0;
    for (std::size_t i = 0; i < z.rows; ++i) {
        const double* row = z.row(i);
        double m = row[0];
        for (std::size_t j = 1; j < z.cols; ++j) m = std::max(m, row[j]);
        double sum = 0.0;
        for (std::size_t j = 0; j < z.cols; ++j) sum += std::exp(row[j] - m);
        const double lse = m + std::log(sum);
        const int y = n.labels[i];
        require(y >= 0 && static_cast<std::size_t>(y) < z.cols, ErrKind::contract,
                "softmax-cross-entropy: label out of range");
        total += lse - row[y];
        double* prow = n.aux.row(i);
        for (std::size_t j = 0; j < z.cols; ++j) prow[j] = std::exp(row[j] - lse);
    }
    n.value = Matrix(1, 1);
    n.value.data[0] = total / static_cast<double>(z.rows);
    return push(std::move(n));
}

int Tape::squared_error(int pred, Matrix targets) {
    const Matrix& p = val(pred);
    require(p.same_shape(targets), ErrKind::dimension, "squared-error: target shape differs");
    TapeNode n;
    n.op = OpKind::squared_err;
    n.a = pred;
    n.aux = std::move(targets);
    double total = 0.0;
    for (std::size_t i = 0; i < p.data.size(); ++i) {
        const double d = p.data[i] - n.aux.data[i];
        total += d * d;
    }
    n.value = Matrix(1, 1);
    n.value.data[0] = total / static_cast<double>(p.rows);
    return push(std::move(n));
}

int Tape::l1_term(const ParamSegment& slice, std::vector<double> coeff, double tau) {
    require(coeff.size() == slice.size(), ErrKind::dimension, "l1-term: coeff length differs from slice");
    require(tau >= 0.0, ErrKind::contract, "l1-term: tau must be >= 0");
    TapeNode n;
    n.op = OpKind::l1_term;
    n.param = slice;
    n.has_param = true;
    n.scale = tau;
    n.aux = Matrix(1, coeff.size());
    n.aux.data = std::move(coeff);
    const double* theta = params_->data.data() + slice.offset;
    double total = 0.0;
    for (std::size_t i = 0; i < slice.size(); ++i) total += n.aux.data[i] * std::fabs(theta[i]);
    n.value = Matrix(1, 1);
    n.value.data[0] = tau * total;
    return push(std::move(n));
}

void Tape::set_loss(int node) {
    const Matrix& v = val(node);
    require(v.rows == 1 && v.cols == 1, ErrKind::contract, "loss root must be a scalar node");
    loss_ = node;
}

ParamVector Tape::backward() {
    require(loss_ >= 0, ErrKind::contract, "backward: no scalar loss node set");
    require(loss_ == static_cast<int>(nodes_.size()) - 1, ErrKind::contract,
            "backward: loss must be the last tape node");

    ParamVector grad;
    grad.segments = params_->segments;
    grad.data.assign(params_->data.size(), 0.0);

    for (auto& n : nodes_) {
        n.grad.rows = n.value.rows;
        n.grad.cols = n.value.cols;
        n.grad.data.assign(n.value.data.size(), 0.0);
    }
    nodes_[static_cast<std::size_t>(loss_)].grad.data[0] = 1.0;

    for (std::size_t ni = nodes_.size(); ni-- > 0;) {
        TapeNode& n = nodes_[ni];
        switch (n.op) {
            case OpKind::input:
                break;
            case OpKind::matmul: {
                Matrix& dx = nodes_[n.a].grad;
                const Matrix& x = nodes_[n.a].value;
                const double* w = params_->data.data() + n.param.offset;
                const std::size_t fan_in = n.param.rows;
                const std::size_t fan_out = n.param.cols;
                // dX += dY * W^T (W rows are contiguous fan-out slices)
                for (std::size_t i = 0; i < n.grad.rows; ++i) {
                    const double* gy = n.grad.row(i);
                    double* gx = dx.row(i);
                    for (std::size_t k = 0; k < fan_in; ++k) {
                        const double* wrow = w + k * fan_out;
                        double s = 0.0;
                        for (std::size_t j = 0; j < fan_out; ++j) s = std::fma(gy[j], wrow[j], s);
                        gx[k] += s;
                    }
                }
                // dW += X^T * dY
                at_b_accum_raw(grad.data.data() + n.param.offset, x, n.grad);
                break;
            }
            case OpKind::add: {
                Matrix& dx = nodes_[n.a].grad;
                for (std::size_t i = 0; i < n.grad.data.size(); ++i) dx.data[i] += n.grad.data[i];
                if (n.has_param) {
                    double* db = grad.data.data() + n.param.offset;
                    for (std::size_t i = 0; i < n.grad.rows; ++i) {
                        const double* gr = n.grad.row(i);
                        for (std::size_t j = 0; j < n.grad.cols; ++j) db[j] += gr[j];
                    }
                } else {
                    Matrix& dy = nodes_[n.b].grad;
                    for (std::size_t i = 0; i < n.grad.data.size(); ++i) dy.data[i] += n.grad.data[i];
                }
                break;
            }
            case OpKind::relu: {
                Matrix& dx = nodes_[n.a].grad;
                const Matrix& x = nodes_[n.a].value;
                for (std::size_t i = 0; i < n.grad.data.size(); ++i)
                    if (x.data[i] > 0.0) dx.data[i] += n.grad.data[i];
                break;
            }
            case OpKind::tanh_act: {
                Matrix& dx = nodes_[n.a].grad;
                for (std::size_t i = 0; i < n.grad.data.size(); ++i) {
                    const double t = n.value.data[i];
                    dx.data[i] += n.grad.data[i] * (1.0 - t * t);
                }
                break;
            }
            case OpKind::elem_mul: {
                Matrix& dx = nodes_[n.a].grad;
                Matrix& dy = nodes_[n.b].grad;
                const Matrix& x = nodes_[n.a].value;
                const Matrix& y = nodes_[n.b].value;
                for (std::size_t i = 0; i < n.grad.data.size(); ++i) {
                    dx.data[i] += n.grad.data[i] * y.data[i];
                    dy.data[i] += n.grad.data[i] * x.data[i];
                }
                break;
            }
            case OpKind::dropout: {
                Matrix& dx = nodes_[n.a].grad;
                for (std::size_t i = 0; i < n.grad.data.size(); ++i)
                    dx.data[i] += n.grad.data[i] * n.aux.data[i] * n.scale;
                break;
            }
            case OpKind::softmax_xent: {
                Matrix& dz = nodes_[n.a].grad;
                const double g = n.grad.data[0] / static_cast<double>(n.aux.rows);
                for (std::size_t i = 0; i < n.aux.rows; ++i) {
                    const double* prow = n.aux.row(i);
                    double* gz = dz.row(i);
                    for (std::size_t j = 0; j < n.aux.cols; ++j) gz[j] += g * prow[j];
                    gz[static_cast<std::size_t>(n.labels[i])] -= g;
                }
                break;
            }
            case OpKind::squared_err: {
                Matrix& dp = nodes_[n.a].grad;
                const Matrix& p = nodes_[n.a].value;
                const double g = 2.0 * n.grad.data[0] / static_cast<double>(p.rows);
                for (std::size_t i = 0; i < p.data.size(); ++i)
                    dp.data[i] += g * (p.data[i] - n.aux.data[i]);
                break;
            }
            case OpKind::l1_term: {
                const double g = n.grad.data[0] * n.scale;
                const double* theta = params_->data.data() + n.param.offset;
                double* gp = grad.data.data() + n.param.offset;
                for (std::size_t i = 0; i < n.param.size(); ++i)
                    gp[i] += g * n.aux.data[i] * sign_of(theta[i]);
                break;
            }
        }
    }
    return grad;
}

ForwardPass forward(const NetDef& net, const ParamVector& params, const Matrix& batch,
                    SeedStream* dropout_stream) {
    require(batch.cols == net.input_width, ErrKind::dimension,
            "forward: batch width " + std::to_string(batch.cols) + " != model input width " +
                std::to_string(net.input_width));
    require(!net.layers.empty(), ErrKind::contract, "forward: net has no layers");

    ForwardPass fp{Tape(&params)};
    int node = fp.tape.input(batch);
    int layer = 0;
    for (const auto& ld : net.layers) {
        const ParamSegment& w = params.segment(ld.weight);
        node = fp.tape.matmul(node, w);
        fp.tape.set_layer_index(node, layer);
        node = fp.tape.add_bias(node, params.segment(ld.bias));
        fp.tape.set_layer_index(node, layer);
        if (ld.act == Act::relu) node = fp.tape.relu(node);
        else if (ld.act == Act::tanh) node = fp.tape.tanh_act(node);
        fp.tape.set_layer_index(node, layer);
        if (ld.dropout && dropout_stream != nullptr && net.dropout_p > 0.0) {
            const Matrix& v = fp.tape.value(node);
            Matrix mask(v.rows, v.cols);
            for (double& m : mask.data)
                m = dropout_stream->uniform() < net.dropout_p ? 0.0 : 1.0;
            node = fp.tape.dropout(node, std::move(mask), net.dropout_p);
            fp.tape.set_layer_index(node, layer);
        }
        ++layer;
    }
    fp.output_node = node;

    if (!fp.tape.value(node).all_finite()) {
        // Find the first offending node so the error names the layer.
        for (const auto& n : fp.tape.nodes()) {
            if (!n.value.all_finite())
                fail(ErrKind::numeric, "forward: non-finite output at layer " +
                                           std::to_string(n.layer_index) + " (" +
                                           std::string(op_name(n.op)) + ")");
        }
    }
    return fp;
}

}  // namespace mte
