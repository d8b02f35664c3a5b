#pragma once

// Radiance fields.
//
// A static field maps (position, direction) to (color, density). A dynamic
// field additionally takes a normalized time in [0, 1] and emits a blending
// factor β. Both share one network shape:
//
//   enc(position * position_scale) [+ enc(time)]
//     -> `depth` ReLU layers of `width` units (input re-injected at layer `skip`)
//     -> density head (softplus), blend head (sigmoid, dynamic only),
//        feature layer -> [feature, enc(direction)] -> ReLU(width/2) -> rgb (sigmoid)
//
// Parameters live in an external flat vector so that several fields can share
// one optimizer state and be perturbed uniformly by gradient checks.

#include "nova/dense.hpp"
#include "nova/encoding.hpp"
#include "nova/geometry.hpp"

#include <optional>
#include <random>
#include <string>

namespace nova {

enum class FieldKind { Static, Dynamic };

inline const char* to_string(FieldKind kind) { return kind == FieldKind::Static ? "static" : "dynamic"; }

inline FieldKind parse_field_kind(const std::string& s) {
    if (s == "static") return FieldKind::Static;
    if (s == "dynamic") return FieldKind::Dynamic;
    throw DataError("unknown field kind '" + s + "'");
}

struct FieldConfig {
    int depth = 4;
    int width = 32;
    int skip = 2;  // layer that re-reads the encoded input; <= 0 disables
    int pos_levels = 6;
    int dir_levels = 2;
    int time_levels = 2;
    double position_scale = 0.25;
    double sigma_bias = 0.0;  // initial bias of the density head

    friend bool operator==(const FieldConfig&, const FieldConfig&) = default;

    void validate() const {
        if (depth < 1 || width < 2) throw UsageError("field network needs depth >= 1 and width >= 2");
        if (pos_levels < 0 || dir_levels < 0 || time_levels < 0) throw UsageError("encoding levels must be >= 0");
        if (!(position_scale > 0.0)) throw UsageError("position_scale must be positive");
    }
};

class FieldArchitecture {
public:
    FieldArchitecture() : FieldArchitecture(FieldKind::Static, FieldConfig{}) {}

    FieldArchitecture(FieldKind kind, const FieldConfig& config) : kind_(kind), config_(config) {
        config_.validate();
        pos_dim_ = static_cast<int>(encoded_size(3, config_.pos_levels));
        time_dim_ = kind_ == FieldKind::Dynamic ? static_cast<int>(encoded_size(1, config_.time_levels)) : 0;
        dir_dim_ = static_cast<int>(encoded_size(3, config_.dir_levels));
        const int in = input_dim();
        const int w = config_.width;
        std::size_t offset = 0;
        for (int l = 0; l < config_.depth; ++l) {
            const int layer_in = l == 0 ? in : (l == config_.skip ? w + in : w);
            trunk_.push_back(nn::make_layer(layer_in, w, offset));
        }
        sigma_head_ = nn::make_layer(w, 1, offset);
        if (kind_ == FieldKind::Dynamic) {
            beta_head_ = nn::make_layer(w, 1, offset);
        }
        feature_ = nn::make_layer(w, w, offset);
        color_hidden_ = nn::make_layer(w + dir_dim_, color_width(), offset);
        color_out_ = nn::make_layer(color_width(), 3, offset);
        parameter_count_ = offset;
    }

    FieldKind kind() const { return kind_; }
    bool is_dynamic() const { return kind_ == FieldKind::Dynamic; }
    const FieldConfig& config() const { return config_; }
    std::size_t parameter_count() const { return parameter_count_; }
    int input_dim() const { return pos_dim_ + time_dim_; }
    int position_dim() const { return pos_dim_; }
    int direction_dim() const { return dir_dim_; }
    int color_width() const { return std::max(1, config_.width / 2); }
    bool has_skip(int layer) const { return layer > 0 && layer == config_.skip; }

    const std::vector<nn::DenseLayer>& trunk() const { return trunk_; }
    const nn::DenseLayer& sigma_head() const { return sigma_head_; }
    const nn::DenseLayer& beta_head() const { return beta_head_; }
    const nn::DenseLayer& feature() const { return feature_; }
    const nn::DenseLayer& color_hidden() const { return color_hidden_; }
    const nn::DenseLayer& color_out() const { return color_out_; }

    void initialize(std::span<double> params, std::uint64_t seed) const {
        if (params.size() != parameter_count_) {
            throw std::invalid_argument("initialize: parameter span has wrong size");
        }
        std::mt19937_64 rng(seed);
        for (const auto& layer : trunk_) nn::init_layer(layer, params, rng, 2.0);
        nn::init_layer(sigma_head_, params, rng, 1.0);
        params[sigma_head_.bias_offset] = config_.sigma_bias;
        if (is_dynamic()) nn::init_layer(beta_head_, params, rng, 1.0);
        nn::init_layer(feature_, params, rng, 1.0);
        nn::init_layer(color_hidden_, params, rng, 2.0);
        nn::init_layer(color_out_, params, rng, 1.0);
    }

    friend bool operator==(const FieldArchitecture& a, const FieldArchitecture& b) {
        return a.kind_ == b.kind_ && a.config_ == b.config_;
    }

private:
    FieldKind kind_;
    FieldConfig config_;
    int pos_dim_ = 0;
    int time_dim_ = 0;
    int dir_dim_ = 0;
    std::vector<nn::DenseLayer> trunk_;
    nn::DenseLayer sigma_head_;
    nn::DenseLayer beta_head_;
    nn::DenseLayer feature_;
    nn::DenseLayer color_hidden_;
    nn::DenseLayer color_out_;
    std::size_t parameter_count_ = 0;
};

// Non-owning handle: an architecture plus its parameter slice.
struct FieldView {
    const FieldArchitecture* arch = nullptr;
    std::span<const double> params;
};

// Owning field, convenient for standalone use.
struct RadianceField {
    FieldArchitecture arch;
    std::vector<double> params;

    static RadianceField create(FieldKind kind, const FieldConfig& config, std::uint64_t seed) {
        RadianceField f{FieldArchitecture(kind, config), {}};
        f.params.assign(f.arch.parameter_count(), 0.0);
        f.arch.initialize(f.params, seed);
        return f;
    }

    FieldView view() const { return {&arch, params}; }
};

// Batched inputs, one column per sample.
struct FieldInputs {
    nn::Matrix positions;   // 3 x B, world units in the field's own frame
    nn::Matrix directions;  // 3 x B, unit
    nn::Matrix times;       // 1 x B (ignored by static fields)

    Eigen::Index size() const { return positions.cols(); }
};

struct FieldOutputs {
    nn::Matrix rgb;    // 3 x B in [0, 1]
    nn::Matrix sigma;  // 1 x B, >= 0
    nn::Matrix beta;   // 1 x B in [0, 1]; constant 1 for static fields
};

// Intermediate activations needed by field_backward.
struct FieldCache {
    std::vector<nn::Matrix> trunk_in;
    std::vector<nn::Matrix> trunk_pre;
    nn::Matrix hidden;
    nn::Matrix sigma_pre;
    nn::Matrix color_in;
    nn::Matrix color_pre;
    nn::Matrix color_hidden;
};

namespace detail {

inline nn::Matrix encode_columns(const nn::Matrix& values, int levels, double scale) {
    const auto rows = static_cast<Eigen::Index>(encoded_size(static_cast<std::size_t>(values.rows()), levels));
    nn::Matrix out(rows, values.cols());
    std::vector<double> v(static_cast<std::size_t>(values.rows()));
    for (Eigen::Index c = 0; c < values.cols(); ++c) {
        for (Eigen::Index r = 0; r < values.rows(); ++r) v[static_cast<std::size_t>(r)] = values(r, c) * scale;
        positional_encoding(v, levels, std::span<double>(out.col(c).data(), static_cast<std::size_t>(rows)));
    }
    return out;
}

inline void relu_inplace(nn::Matrix& m) { m = m.cwiseMax(0.0); }

}  // namespace detail

inline FieldOutputs field_forward(const FieldArchitecture& arch, std::span<const double> params,
                                  const FieldInputs& in, FieldCache* cache = nullptr) {
    if (params.size() != arch.parameter_count()) {
        throw std::invalid_argument("field_forward: parameter span has wrong size");
    }
    const Eigen::Index batch = in.size();
    const auto& cfg = arch.config();

    nn::Matrix x(arch.input_dim(), batch);
    x.topRows(arch.position_dim()) = detail::encode_columns(in.positions, cfg.pos_levels, cfg.position_scale);
    if (arch.is_dynamic()) {
        x.bottomRows(arch.input_dim() - arch.position_dim()) = detail::encode_columns(in.times, cfg.time_levels, 1.0);
    }

    FieldCache local;
    FieldCache& c = cache != nullptr ? *cache : local;
    c.trunk_in.resize(arch.trunk().size());
    c.trunk_pre.resize(arch.trunk().size());

    nn::Matrix h;
    for (std::size_t l = 0; l < arch.trunk().size(); ++l) {
        const int li = static_cast<int>(l);
        if (l == 0) {
            c.trunk_in[l] = x;
        } else if (arch.has_skip(li)) {
            c.trunk_in[l].resize(h.rows() + x.rows(), batch);
            c.trunk_in[l].topRows(h.rows()) = h;
            c.trunk_in[l].bottomRows(x.rows()) = x;
        } else {
            c.trunk_in[l] = std::move(h);
        }
        nn::dense_forward(arch.trunk()[l], params, c.trunk_in[l], c.trunk_pre[l]);
        h = c.trunk_pre[l].cwiseMax(0.0);
    }
    c.hidden = std::move(h);

    FieldOutputs out;
    nn::dense_forward(arch.sigma_head(), params, c.hidden, c.sigma_pre);
    out.sigma = c.sigma_pre.unaryExpr([](double v) { return softplus(v); });

    if (arch.is_dynamic()) {
        nn::Matrix beta_pre;
        nn::dense_forward(arch.beta_head(), params, c.hidden, beta_pre);
        out.beta = beta_pre.unaryExpr([](double v) { return sigmoid(v); });
    } else {
        out.beta = nn::Matrix::Ones(1, batch);
    }

    nn::Matrix feature;
    nn::dense_forward(arch.feature(), params, c.hidden, feature);
    c.color_in.resize(feature.rows() + arch.direction_dim(), batch);
    c.color_in.topRows(feature.rows()) = feature;
    c.color_in.bottomRows(arch.direction_dim()) = detail::encode_columns(in.directions, cfg.dir_levels, 1.0);
    nn::dense_forward(arch.color_hidden(), params, c.color_in, c.color_pre);
    c.color_hidden = c.color_pre.cwiseMax(0.0);
    nn::Matrix rgb_pre;
    nn::dense_forward(arch.color_out(), params, c.color_hidden, rgb_pre);
    out.rgb = rgb_pre.unaryExpr([](double v) { return sigmoid(v); });
    return out;
}

// Accumulates into dparams the gradient of a scalar objective whose partials with
// respect to the field outputs are d_rgb (3 x B), d_sigma (1 x B) and d_beta (1 x B).
// d_beta is ignored for static fields.
inline void field_backward(const FieldArchitecture& arch, std::span<const double> params, const FieldCache& c,
                           const FieldOutputs& out, const nn::Matrix& d_rgb, const nn::Matrix& d_sigma,
                           const nn::Matrix& d_beta, std::span<double> dparams) {
    const int w = arch.config().width;

    nn::Matrix d_rgb_pre = d_rgb.cwiseProduct(out.rgb.cwiseProduct((1.0 - out.rgb.array()).matrix()));
    nn::Matrix d_color_hidden;
    nn::dense_backward(arch.color_out(), params, c.color_hidden, d_rgb_pre, dparams, &d_color_hidden);
    nn::Matrix d_color_pre = (c.color_pre.array() > 0.0).select(d_color_hidden, 0.0);
    nn::Matrix d_color_in;
    nn::dense_backward(arch.color_hidden(), params, c.color_in, d_color_pre, dparams, &d_color_in);
    nn::Matrix d_feature = d_color_in.topRows(w);

    nn::Matrix d_hidden;
    nn::dense_backward(arch.feature(), params, c.hidden, d_feature, dparams, &d_hidden);

    nn::Matrix d_sigma_pre = d_sigma.cwiseProduct(c.sigma_pre.unaryExpr([](double v) { return sigmoid(v); }));
    nn::Matrix d_tmp;
    nn::dense_backward(arch.sigma_head(), params, c.hidden, d_sigma_pre, dparams, &d_tmp);
    d_hidden += d_tmp;

    if (arch.is_dynamic()) {
        nn::Matrix d_beta_pre = d_beta.cwiseProduct(out.beta.cwiseProduct((1.0 - out.beta.array()).matrix()));
        nn::dense_backward(arch.beta_head(), params, c.hidden, d_beta_pre, dparams, &d_tmp);
        d_hidden += d_tmp;
    }

    for (std::size_t l = arch.trunk().size(); l-- > 0;) {
        nn::Matrix d_pre = (c.trunk_pre[l].array() > 0.0).select(d_hidden, 0.0);
        if (l == 0) {
            nn::dense_backward(arch.trunk()[l], params, c.trunk_in[l], d_pre, dparams, nullptr);
            break;
        }
        nn::Matrix d_in;
        nn::dense_backward(arch.trunk()[l], params, c.trunk_in[l], d_pre, dparams, &d_in);
        if (arch.has_skip(static_cast<int>(l))) {
            d_hidden = d_in.topRows(w);
        } else {
            d_hidden = std::move(d_in);
        }
    }
}

// ---------------------------------------------------------------------------
// Point-wise query API.

struct FieldSample {
    Vec3 color = Vec3::Zero();
    double sigma = 0.0;
    double beta = 1.0;
};

struct TimeRemap {
    double scale = 1.0;
    double offset = 0.0;
    double operator()(double t) const { return scale * t + offset; }
};

// A dynamic field rigidly placed in the world and re-timed.
struct ObjectInstance {
    FieldView field;
    SE3 world_transform;
    TimeRemap time_remap;

    void validate() const {
        if (!world_transform.is_valid(1e-6)) throw UsageError("object instance transform is not a valid rigid motion");
        if (time_remap.scale == 0.0 || !std::isfinite(time_remap.scale) || !std::isfinite(time_remap.offset)) {
            throw UsageError("object instance time remap must have a finite non-zero scale");
        }
    }
};

namespace detail {

inline void check_query_inputs(std::span<const Vec3> positions, std::span<const Vec3> directions) {
    if (positions.size() != directions.size()) {
        throw UsageError("query: positions and directions differ in length");
    }
    for (std::size_t i = 0; i < positions.size(); ++i) {
        if (!all_finite(positions[i]) || !all_finite(directions[i])) {
            throw NumericalError("query: non-finite input at index " + std::to_string(i));
        }
        if (std::abs(directions[i].norm() - 1.0) > 1e-6) {
            throw UsageError("query: direction at index " + std::to_string(i) + " is not unit length");
        }
    }
}

inline std::vector<FieldSample> run_query(const FieldView& field, std::span<const Vec3> positions,
                                          std::span<const Vec3> directions, std::span<const double> times) {
    FieldInputs in;
    const auto n = static_cast<Eigen::Index>(positions.size());
    in.positions.resize(3, n);
    in.directions.resize(3, n);
    in.times.resize(1, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        in.positions.col(i) = positions[static_cast<std::size_t>(i)];
        in.directions.col(i) = directions[static_cast<std::size_t>(i)];
        in.times(0, i) = times.empty() ? 0.0 : times[static_cast<std::size_t>(i)];
    }
    const FieldOutputs out = field_forward(*field.arch, field.params, in);
    std::vector<FieldSample> samples(positions.size());
    for (Eigen::Index i = 0; i < n; ++i) {
        auto& s = samples[static_cast<std::size_t>(i)];
        s.color = out.rgb.col(i);
        s.sigma = out.sigma(0, i);
        s.beta = out.beta(0, i);
    }
    return samples;
}

}  // namespace detail

inline std::vector<FieldSample> query_static(const FieldView& field, std::span<const Vec3> positions,
                                             std::span<const Vec3> directions) {
    if (field.arch == nullptr || field.arch->is_dynamic()) throw UsageError("query_static needs a static field");
    detail::check_query_inputs(positions, directions);
    return detail::run_query(field, positions, directions, {});
}

inline std::vector<FieldSample> query_dynamic(const FieldView& field, std::span<const Vec3> positions,
                                              std::span<const Vec3> directions, std::span<const double> times) {
    if (field.arch == nullptr || !field.arch->is_dynamic()) throw UsageError("query_dynamic needs a dynamic field");
    detail::check_query_inputs(positions, directions);
    if (times.size() != positions.size()) throw UsageError("query_dynamic: times and positions differ in length");
    for (std::size_t i = 0; i < times.size(); ++i) {
        if (!std::isfinite(times[i])) throw NumericalError("query: non-finite time at index " + std::to_string(i));
    }
    return detail::run_query(field, positions, directions, times);
}

// The instance's field evaluated in its own frame: positions and directions are
// mapped through the inverse world transform and time through the remap.
inline std::vector<FieldSample> query_instance(const ObjectInstance& instance, std::span<const Vec3> positions,
                                               std::span<const Vec3> directions, double time) {
    instance.validate();
    const SE3 to_local = instance.world_transform.inverse();
    std::vector<Vec3> local_pos(positions.size());
    std::vector<Vec3> local_dir(directions.size());
    for (std::size_t i = 0; i < positions.size(); ++i) local_pos[i] = to_local.apply(positions[i]);
    for (std::size_t i = 0; i < directions.size(); ++i) local_dir[i] = to_local.rotate(directions[i]);
    std::vector<double> times(positions.size(), instance.time_remap(time));
    return query_dynamic(instance.field, local_pos, local_dir, times);
}

}  // namespace nova
