#include "actguard/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "actguard/errors.hpp"
#include "actguard/simd/kernels.hpp"

namespace actguard {
namespace {

using BackwardFn = std::function<void(TensorNode&)>;

Tensor make_result(Shape shape, std::vector<float> data, std::vector<Tensor> inputs, BackwardFn fn) {
    auto node = std::make_shared<TensorNode>();
    node->shape = std::move(shape);
    node->data = std::move(data);
    if (grad_mode_enabled()) {
        const bool any = std::any_of(inputs.begin(), inputs.end(),
                                     [](const Tensor& t) { return t.requires_grad(); });
        if (any) {
            node->requires_grad = true;
            node->parents.reserve(inputs.size());
            for (auto& t : inputs) node->parents.push_back(t.shared());
            node->backward_fn = std::move(fn);
        }
    }
    return Tensor(std::move(node));
}

TensorNode& parent(TensorNode& self, std::size_t i) { return *self.parents[i]; }

void require_rank2(const Tensor& x, const char* op) {
    if (x.rank() != 2) {
        throw InvalidArgument(std::string(op) + " expects a rank-2 tensor, got " + shape_string(x.shape()));
    }
}

// Flat-index maps from an output element to each broadcast operand.
struct Broadcast {
    Shape out;
    std::vector<std::size_t> index_a;
    std::vector<std::size_t> index_b;
    bool same = false;
};

Shape broadcast_shape(const Shape& a, const Shape& b) {
    const std::size_t rank = std::max(a.size(), b.size());
    Shape out(rank);
    for (std::size_t i = 0; i < rank; ++i) {
        const std::size_t da = i < rank - a.size() ? 1 : a[i - (rank - a.size())];
        const std::size_t db = i < rank - b.size() ? 1 : b[i - (rank - b.size())];
        if (da != db && da != 1 && db != 1) {
            throw InvalidArgument("shapes " + shape_string(a) + " and " + shape_string(b) +
                                  " are not broadcastable");
        }
        out[i] = std::max(da, db);
    }
    return out;
}

std::vector<std::size_t> broadcast_index(const Shape& from, const Shape& out) {
    const std::size_t rank = out.size();
    const std::size_t offset = rank - from.size();
    std::vector<std::size_t> strides(rank, 0);
    std::size_t stride = 1;
    for (std::size_t i = rank; i-- > offset;) {
        const std::size_t d = from[i - offset];
        strides[i] = d == 1 ? 0 : stride;
        stride *= d;
    }
    const std::size_t n = shape_numel(out);
    std::vector<std::size_t> index(n);
    std::vector<std::size_t> counter(rank, 0);
    std::size_t flat = 0;
    for (std::size_t k = 0; k < n; ++k) {
        index[k] = flat;
        for (std::size_t i = rank; i-- > 0;) {
            ++counter[i];
            flat += strides[i];
            if (counter[i] < out[i]) break;
            flat -= strides[i] * counter[i];
            counter[i] = 0;
        }
    }
    return index;
}

Broadcast plan_broadcast(const Shape& a, const Shape& b) {
    Broadcast plan;
    if (a == b) {
        plan.out = a;
        plan.same = true;
        return plan;
    }
    plan.out = broadcast_shape(a, b);
    plan.index_a = broadcast_index(a, plan.out);
    plan.index_b = broadcast_index(b, plan.out);
    return plan;
}

// Materializes `x` broadcast to `out`. Shape must already be validated.
std::vector<float> expand(const Tensor& x, const Shape& out, std::vector<std::size_t>& index) {
    if (x.shape() == out) {
        index.clear();
        return {x.data().begin(), x.data().end()};
    }
    index = broadcast_index(x.shape(), out);
    std::vector<float> values(index.size());
    for (std::size_t i = 0; i < index.size(); ++i) values[i] = x.data()[index[i]];
    return values;
}

template <typename Fwd, typename GradA, typename GradB>
Tensor binary(const Tensor& a, const Tensor& b, Fwd fwd, GradA grad_a, GradB grad_b) {
    auto plan = std::make_shared<Broadcast>(plan_broadcast(a.shape(), b.shape()));
    const std::size_t n = shape_numel(plan->out);
    std::vector<float> out(n);
    const auto da = a.data();
    const auto db = b.data();
    if (plan->same) {
        for (std::size_t i = 0; i < n; ++i) out[i] = fwd(da[i], db[i]);
    } else {
        for (std::size_t i = 0; i < n; ++i) out[i] = fwd(da[plan->index_a[i]], db[plan->index_b[i]]);
    }
    return make_result(plan->out, std::move(out), {a, b}, [plan, grad_a, grad_b](TensorNode& self) {
        TensorNode& pa = parent(self, 0);
        TensorNode& pb = parent(self, 1);
        const std::size_t n = self.data.size();
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t ia = plan->same ? i : plan->index_a[i];
            const std::size_t ib = plan->same ? i : plan->index_b[i];
            const float g = self.grad[i];
            if (pa.requires_grad) pa.grad[ia] += grad_a(g, pa.data[ia], pb.data[ib]);
            if (pb.requires_grad) pb.grad[ib] += grad_b(g, pa.data[ia], pb.data[ib]);
        }
    });
}

template <typename Fwd, typename Deriv>
Tensor unary(const Tensor& x, Fwd fwd, Deriv deriv) {
    const auto dx = x.data();
    std::vector<float> out(dx.size());
    for (std::size_t i = 0; i < dx.size(); ++i) out[i] = fwd(dx[i]);
    return make_result(x.shape(), std::move(out), {x}, [deriv](TensorNode& self) {
        TensorNode& px = parent(self, 0);
        for (std::size_t i = 0; i < self.data.size(); ++i) {
            px.grad[i] += self.grad[i] * deriv(px.data[i], self.data[i]);
        }
    });
}

std::pair<std::size_t, std::size_t> rows_cols(const Tensor& x) {
    if (x.rank() == 1) return {1, x.dim(0)};
    if (x.rank() == 2) return {x.dim(0), x.dim(1)};
    throw InvalidArgument("expected rank 1 or 2, got " + shape_string(x.shape()));
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    return binary(
        a, b, [](float x, float y) { return x + y; }, [](float g, float, float) { return g; },
        [](float g, float, float) { return g; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    return binary(
        a, b, [](float x, float y) { return x - y; }, [](float g, float, float) { return g; },
        [](float g, float, float) { return -g; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    return binary(
        a, b, [](float x, float y) { return x * y; }, [](float g, float, float y) { return g * y; },
        [](float g, float x, float) { return g * x; });
}

Tensor scale(const Tensor& x, float factor) {
    return unary(
        x, [factor](float v) { return v * factor; }, [factor](float, float) { return factor; });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    require_rank2(a, "matmul");
    require_rank2(b, "matmul");
    const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
    if (b.dim(0) != k) {
        throw InvalidArgument("matmul shape mismatch " + shape_string(a.shape()) + " x " +
                              shape_string(b.shape()));
    }
    const auto& kern = simd::active();
    std::vector<float> out(m * n, 0.0f);
    const float* pa = a.data().data();
    const float* pb = b.data().data();
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) kern.axpy(pa[i * k + p], pb + p * n, out.data() + i * n, n);
    }
    return make_result({m, n}, std::move(out), {a, b}, [m, k, n](TensorNode& self) {
        const auto& kern = simd::active();
        TensorNode& na = parent(self, 0);
        TensorNode& nb = parent(self, 1);
        const float* g = self.grad.data();
        if (na.requires_grad) {
            for (std::size_t i = 0; i < m; ++i) {
                for (std::size_t p = 0; p < k; ++p) {
                    na.grad[i * k + p] += kern.dot(g + i * n, nb.data.data() + p * n, n);
                }
            }
        }
        if (nb.requires_grad) {
            for (std::size_t i = 0; i < m; ++i) {
                for (std::size_t p = 0; p < k; ++p) {
                    kern.axpy(na.data[i * k + p], g + i * n, nb.grad.data() + p * n, n);
                }
            }
        }
    });
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
    require_rank2(a, "matmul_nt");
    require_rank2(b, "matmul_nt");
    const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(0);
    if (b.dim(1) != k) {
        throw InvalidArgument("matmul_nt shape mismatch " + shape_string(a.shape()) + " x " +
                              shape_string(b.shape()) + "^T");
    }
    const auto& kern = simd::active();
    std::vector<float> out(m * n);
    const float* pa = a.data().data();
    const float* pb = b.data().data();
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) out[i * n + j] = kern.dot(pa + i * k, pb + j * k, k);
    }
    return make_result({m, n}, std::move(out), {a, b}, [m, k, n](TensorNode& self) {
        const auto& kern = simd::active();
        TensorNode& na = parent(self, 0);
        TensorNode& nb = parent(self, 1);
        for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
                const float g = self.grad[i * n + j];
                if (na.requires_grad) kern.axpy(g, nb.data.data() + j * k, na.grad.data() + i * k, k);
                if (nb.requires_grad) kern.axpy(g, na.data.data() + i * k, nb.grad.data() + j * k, k);
            }
        }
    });
}

Tensor transpose(const Tensor& x) {
    require_rank2(x, "transpose");
    const std::size_t m = x.dim(0), n = x.dim(1);
    std::vector<float> out(m * n);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) out[j * m + i] = x.data()[i * n + j];
    }
    return make_result({n, m}, std::move(out), {x}, [m, n](TensorNode& self) {
        TensorNode& px = parent(self, 0);
        for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t j = 0; j < n; ++j) px.grad[i * n + j] += self.grad[j * m + i];
        }
    });
}

Tensor reshape(const Tensor& x, Shape shape) {
    if (shape_numel(shape) != x.numel()) {
        throw InvalidArgument("cannot reshape " + shape_string(x.shape()) + " to " + shape_string(shape));
    }
    std::vector<float> out(x.data().begin(), x.data().end());
    return make_result(std::move(shape), std::move(out), {x}, [](TensorNode& self) {
        simd::active().add_inplace(self.grad.data(), parent(self, 0).grad.data(), self.grad.size());
    });
}

Tensor softmax_rows(const Tensor& x) {
    const auto [rows, cols] = rows_cols(x);
    std::vector<float> out(x.numel());
    const auto in = x.data();
    for (std::size_t r = 0; r < rows; ++r) {
        const float* src = in.data() + r * cols;
        float* dst = out.data() + r * cols;
        const float peak = *std::max_element(src, src + cols);
        float total = 0.0f;
        for (std::size_t c = 0; c < cols; ++c) {
            dst[c] = std::exp(src[c] - peak);
            total += dst[c];
        }
        const float inv = 1.0f / total;
        for (std::size_t c = 0; c < cols; ++c) dst[c] *= inv;
    }
    return make_result(x.shape(), std::move(out), {x}, [rows, cols](TensorNode& self) {
        TensorNode& px = parent(self, 0);
        const auto& kern = simd::active();
        for (std::size_t r = 0; r < rows; ++r) {
            const float* y = self.data.data() + r * cols;
            const float* g = self.grad.data() + r * cols;
            const float inner = kern.dot(y, g, cols);
            float* dx = px.grad.data() + r * cols;
            for (std::size_t c = 0; c < cols; ++c) dx[c] += y[c] * (g[c] - inner);
        }
    });
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, float eps) {
    const auto [rows, cols] = rows_cols(x);
    if (gamma.numel() != cols || beta.numel() != cols) {
        throw InvalidArgument("layer_norm parameters must have " + std::to_string(cols) + " elements");
    }
    // Per-row normalized values and inverse std, kept for backward.
    auto saved = std::make_shared<std::pair<std::vector<float>, std::vector<float>>>();
    auto& xhat = saved->first;
    auto& inv_std = saved->second;
    xhat.resize(x.numel());
    inv_std.resize(rows);
    std::vector<float> out(x.numel());
    const auto in = x.data();
    const auto g = gamma.data();
    const auto b = beta.data();
    for (std::size_t r = 0; r < rows; ++r) {
        const float* src = in.data() + r * cols;
        float mu = 0.0f;
        for (std::size_t c = 0; c < cols; ++c) mu += src[c];
        mu /= static_cast<float>(cols);
        float var = 0.0f;
        for (std::size_t c = 0; c < cols; ++c) var += (src[c] - mu) * (src[c] - mu);
        var /= static_cast<float>(cols);
        const float is = 1.0f / std::sqrt(var + eps);
        inv_std[r] = is;
        for (std::size_t c = 0; c < cols; ++c) {
            const float h = (src[c] - mu) * is;
            xhat[r * cols + c] = h;
            out[r * cols + c] = h * g[c] + b[c];
        }
    }
    return make_result(x.shape(), std::move(out), {x, gamma, beta}, [rows, cols, saved](TensorNode& self) {
        TensorNode& px = parent(self, 0);
        TensorNode& pg = parent(self, 1);
        TensorNode& pb = parent(self, 2);
        const auto& xhat = saved->first;
        const auto& inv_std = saved->second;
        std::vector<float> dxhat(cols);
        for (std::size_t r = 0; r < rows; ++r) {
            const float* dy = self.grad.data() + r * cols;
            const float* h = xhat.data() + r * cols;
            if (pg.requires_grad) {
                for (std::size_t c = 0; c < cols; ++c) pg.grad[c] += dy[c] * h[c];
            }
            if (pb.requires_grad) {
                for (std::size_t c = 0; c < cols; ++c) pb.grad[c] += dy[c];
            }
            if (px.requires_grad) {
                float mean_d = 0.0f, mean_dh = 0.0f;
                for (std::size_t c = 0; c < cols; ++c) {
                    dxhat[c] = dy[c] * pg.data[c];
                    mean_d += dxhat[c];
                    mean_dh += dxhat[c] * h[c];
                }
                mean_d /= static_cast<float>(cols);
                mean_dh /= static_cast<float>(cols);
                float* dx = px.grad.data() + r * cols;
                for (std::size_t c = 0; c < cols; ++c) {
                    dx[c] += inv_std[r] * (dxhat[c] - mean_d - h[c] * mean_dh);
                }
            }
        }
    });
}

Tensor gelu(const Tensor& x) {
    constexpr float kC = 0.7978845608028654f;  // sqrt(2/pi)
    constexpr float kA = 0.044715f;
    return unary(
        x,
        [](float v) { return 0.5f * v * (1.0f + std::tanh(kC * (v + kA * v * v * v))); },
        [](float v, float) {
            const float t = std::tanh(kC * (v + kA * v * v * v));
            return 0.5f * (1.0f + t) + 0.5f * v * (1.0f - t * t) * kC * (1.0f + 3.0f * kA * v * v);
        });
}

Tensor relu(const Tensor& x) {
    return unary(
        x, [](float v) { return v > 0.0f ? v : 0.0f; }, [](float v, float) { return v > 0.0f ? 1.0f : 0.0f; });
}

Tensor abs(const Tensor& x) {
    return unary(
        x, [](float v) { return std::fabs(v); },
        [](float v, float) { return v > 0.0f ? 1.0f : (v < 0.0f ? -1.0f : 0.0f); });
}

Tensor embedding(const Tensor& table, std::span<const std::int32_t> ids) {
    require_rank2(table, "embedding");
    const std::size_t vocab = table.dim(0), width = table.dim(1);
    std::vector<float> out(ids.size() * width);
    auto rows = std::make_shared<std::vector<std::int32_t>>(ids.begin(), ids.end());
    for (std::size_t t = 0; t < ids.size(); ++t) {
        if (ids[t] < 0 || static_cast<std::size_t>(ids[t]) >= vocab) {
            throw InvalidArgument("embedding id " + std::to_string(ids[t]) + " out of range");
        }
        std::copy_n(table.data().data() + static_cast<std::size_t>(ids[t]) * width, width,
                    out.data() + t * width);
    }
    return make_result({ids.size(), width}, std::move(out), {table}, [rows, width](TensorNode& self) {
        TensorNode& pt = parent(self, 0);
        const auto& kern = simd::active();
        for (std::size_t t = 0; t < rows->size(); ++t) {
            kern.add_inplace(self.grad.data() + t * width,
                             pt.grad.data() + static_cast<std::size_t>((*rows)[t]) * width, width);
        }
    });
}

Tensor slice_rows(const Tensor& x, std::size_t start, std::size_t count) {
    require_rank2(x, "slice_rows");
    const std::size_t cols = x.dim(1);
    if (start + count > x.dim(0)) throw InvalidArgument("slice_rows out of range");
    std::vector<float> out(x.data().begin() + static_cast<std::ptrdiff_t>(start * cols),
                           x.data().begin() + static_cast<std::ptrdiff_t>((start + count) * cols));
    return make_result({count, cols}, std::move(out), {x}, [start, cols](TensorNode& self) {
        simd::active().add_inplace(self.grad.data(), parent(self, 0).grad.data() + start * cols,
                                   self.grad.size());
    });
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw InvalidArgument("concat_rows of nothing");
    const std::size_t cols = parts.front().dim(1);
    std::size_t rows = 0;
    for (const auto& p : parts) {
        require_rank2(p, "concat_rows");
        if (p.dim(1) != cols) throw InvalidArgument("concat_rows width mismatch");
        rows += p.dim(0);
    }
    std::vector<float> out;
    out.reserve(rows * cols);
    for (const auto& p : parts) out.insert(out.end(), p.data().begin(), p.data().end());
    return make_result({rows, cols}, std::move(out), parts, [](TensorNode& self) {
        std::size_t offset = 0;
        for (auto& p : self.parents) {
            if (p->requires_grad) {
                simd::active().add_inplace(self.grad.data() + offset, p->grad.data(), p->data.size());
            }
            offset += p->data.size();
        }
    });
}

Tensor slice_cols(const Tensor& x, std::size_t start, std::size_t count) {
    require_rank2(x, "slice_cols");
    const std::size_t rows = x.dim(0), cols = x.dim(1);
    if (start + count > cols) throw InvalidArgument("slice_cols out of range");
    std::vector<float> out(rows * count);
    for (std::size_t r = 0; r < rows; ++r) {
        std::copy_n(x.data().data() + r * cols + start, count, out.data() + r * count);
    }
    return make_result({rows, count}, std::move(out), {x}, [rows, cols, start, count](TensorNode& self) {
        TensorNode& px = parent(self, 0);
        for (std::size_t r = 0; r < rows; ++r) {
            simd::active().add_inplace(self.grad.data() + r * count, px.grad.data() + r * cols + start, count);
        }
    });
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw InvalidArgument("concat_cols of nothing");
    const std::size_t rows = parts.front().dim(0);
    std::size_t cols = 0;
    for (const auto& p : parts) {
        require_rank2(p, "concat_cols");
        if (p.dim(0) != rows) throw InvalidArgument("concat_cols height mismatch");
        cols += p.dim(1);
    }
    std::vector<float> out(rows * cols);
    std::size_t offset = 0;
    for (const auto& p : parts) {
        const std::size_t w = p.dim(1);
        for (std::size_t r = 0; r < rows; ++r) {
            std::copy_n(p.data().data() + r * w, w, out.data() + r * cols + offset);
        }
        offset += w;
    }
    return make_result({rows, cols}, std::move(out), parts, [rows, cols](TensorNode& self) {
        std::size_t offset = 0;
        for (auto& p : self.parents) {
            const std::size_t w = p->shape[1];
            if (p->requires_grad) {
                for (std::size_t r = 0; r < rows; ++r) {
                    simd::active().add_inplace(self.grad.data() + r * cols + offset, p->grad.data() + r * w, w);
                }
            }
            offset += w;
        }
    });
}

Tensor clamp(const Tensor& x, const Tensor& low, const Tensor& up) {
    const Shape& out_shape = x.shape();
    if (broadcast_shape(out_shape, low.shape()) != out_shape ||
        broadcast_shape(out_shape, up.shape()) != out_shape) {
        throw InvalidArgument("clamp bounds " + shape_string(low.shape()) + "/" + shape_string(up.shape()) +
                              " do not broadcast to " + shape_string(out_shape));
    }
    auto index_low = std::make_shared<std::vector<std::size_t>>();
    auto index_up = std::make_shared<std::vector<std::size_t>>();
    const std::vector<float> lo = expand(low, out_shape, *index_low);
    const std::vector<float> hi = expand(up, out_shape, *index_up);
    for (std::size_t i = 0; i < lo.size(); ++i) {
        if (!(lo[i] <= hi[i])) throw InvalidArgument("clamp requires low <= up element-wise");
    }
    std::vector<float> out(x.numel());
    simd::active().clamp(x.data().data(), lo.data(), hi.data(), out.data(), out.size());
    return make_result(out_shape, std::move(out), {x, low, up}, [index_low, index_up](TensorNode& self) {
        TensorNode& px = parent(self, 0);
        TensorNode& pl = parent(self, 1);
        TensorNode& pu = parent(self, 2);
        for (std::size_t i = 0; i < self.data.size(); ++i) {
            const std::size_t il = index_low->empty() ? i : (*index_low)[i];
            const std::size_t iu = index_up->empty() ? i : (*index_up)[i];
            const float v = px.data[i];
            const float g = self.grad[i];
            if (v > pu.data[iu]) {
                if (pu.requires_grad) pu.grad[iu] += g;
            } else if (v < pl.data[il]) {
                if (pl.requires_grad) pl.grad[il] += g;
            } else if (px.requires_grad) {
                px.grad[i] += g;
            }
        }
    });
}

Tensor sum(const Tensor& x) {
    float total = 0.0f;
    for (float v : x.data()) total += v;
    return make_result({}, {total}, {x}, [](TensorNode& self) {
        TensorNode& px = parent(self, 0);
        const float g = self.grad[0];
        for (float& d : px.grad) d += g;
    });
}

Tensor mean(const Tensor& x) {
    if (x.numel() == 0) throw InvalidArgument("mean of empty tensor");
    return scale(sum(x), 1.0f / static_cast<float>(x.numel()));
}

Tensor cross_entropy(const Tensor& logits, std::size_t target) {
    const auto [rows, cols] = rows_cols(logits);
    if (rows != 1) throw InvalidArgument("cross_entropy expects a single row of logits");
    if (target >= cols) throw InvalidArgument("cross_entropy target out of range");
    const auto z = logits.data();
    const float peak = *std::max_element(z.begin(), z.end());
    auto probs = std::make_shared<std::vector<float>>(cols);
    float total = 0.0f;
    for (std::size_t c = 0; c < cols; ++c) {
        (*probs)[c] = std::exp(z[c] - peak);
        total += (*probs)[c];
    }
    for (float& p : *probs) p /= total;
    const float loss = -(z[target] - peak - std::log(total));
    return make_result({}, {loss}, {logits}, [probs, target](TensorNode& self) {
        TensorNode& pz = parent(self, 0);
        const float g = self.grad[0];
        for (std::size_t c = 0; c < probs->size(); ++c) {
            pz.grad[c] += g * ((*probs)[c] - (c == target ? 1.0f : 0.0f));
        }
    });
}

Tensor squared_error(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) {
        throw InvalidArgument("squared_error shape mismatch " + shape_string(a.shape()) + " vs " +
                              shape_string(b.shape()));
    }
    float total = 0.0f;
    for (std::size_t i = 0; i < a.numel(); ++i) {
        const float d = a.data()[i] - b.data()[i];
        total += d * d;
    }
    return make_result({}, {total}, {a, b}, [](TensorNode& self) {
        TensorNode& pa = parent(self, 0);
        TensorNode& pb = parent(self, 1);
        const float g = self.grad[0];
        for (std::size_t i = 0; i < pa.data.size(); ++i) {
            const float d = 2.0f * g * (pa.data[i] - pb.data[i]);
            if (pa.requires_grad) pa.grad[i] += d;
            if (pb.requires_grad) pb.grad[i] -= d;
        }
    });
}

Tensor l2_norm(const Tensor& x) {
    const float norm = std::sqrt(simd::sum_squares(x.data()));
    return make_result({}, {norm}, {x}, [](TensorNode& self) {
        TensorNode& px = parent(self, 0);
        const float n = self.data[0];
        if (n == 0.0f) return;
        simd::active().axpy(self.grad[0] / n, px.data.data(), px.grad.data(), px.data.size());
    });
}

Tensor dropout(const Tensor& x, float rate, std::mt19937_64& rng) {
    if (rate <= 0.0f) return x;
    if (rate >= 1.0f) throw InvalidArgument("dropout rate must be < 1");
    auto mask = std::make_shared<std::vector<float>>(x.numel());
    std::bernoulli_distribution keep(1.0 - rate);
    const float kept = 1.0f / (1.0f - rate);
    std::vector<float> out(x.numel());
    for (std::size_t i = 0; i < out.size(); ++i) {
        (*mask)[i] = keep(rng) ? kept : 0.0f;
        out[i] = x.data()[i] * (*mask)[i];
    }
    return make_result(x.shape(), std::move(out), {x}, [mask](TensorNode& self) {
        TensorNode& px = parent(self, 0);
        for (std::size_t i = 0; i < self.grad.size(); ++i) px.grad[i] += self.grad[i] * (*mask)[i];
    });
}

}  // namespace actguard
