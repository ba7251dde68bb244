#include "pacrr/model.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <stdexcept>

#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <zlib.h>

#include "pacrr/error.hpp"
#include "pacrr/rng.hpp"

namespace pacrr {

using nlohmann::json;

void PacrrConfig::validate() const {
    if (l_q < 1) {
        throw ConfigError("l_q must be at least 1");
    }
    if (l_g < 2) {
        throw ConfigError(fmt::format("l_g must be at least 2 (got {})", l_g));
    }
    if (n_s < 1 || n_f < 1) {
        throw ConfigError("n_s and n_f must be at least 1");
    }
    if (l_d < l_g) {
        throw ConfigError(fmt::format("l_d ({}) must be at least l_g ({})", l_d, l_g));
    }
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
        throw ConfigError("learning_rate must be a positive finite number");
    }
}

json to_json(const PacrrConfig& config) {
    return json{{"l_q", config.l_q},
                {"l_d", config.l_d},
                {"l_g", config.l_g},
                {"n_f", config.n_f},
                {"n_s", config.n_s},
                {"mode", to_string(config.mode)},
                {"learning_rate", config.learning_rate},
                {"seed", config.seed}};
}

PacrrConfig config_from_json(const json& j) {
    PacrrConfig config;
    try {
        config.l_q = j.at("l_q").get<std::size_t>();
        config.l_d = j.at("l_d").get<std::size_t>();
        config.l_g = j.at("l_g").get<std::size_t>();
        config.n_f = j.at("n_f").get<std::size_t>();
        config.n_s = j.at("n_s").get<std::size_t>();
        config.mode = parse_distill_mode(j.at("mode").get<std::string>());
        config.learning_rate = j.at("learning_rate").get<double>();
        config.seed = j.at("seed").get<std::uint64_t>();
    } catch (const json::exception& e) {
        throw ConfigError(fmt::format("bad model config: {}", e.what()));
    }
    config.validate();
    return config;
}

namespace {

struct GroupLayout {
    std::string name;
    std::vector<std::size_t> dims;
    double fan_in = 0.0;
    double fan_out = 0.0;  // 0 marks a zero-initialized bias
};

std::vector<GroupLayout> param_layout(const PacrrConfig& config) {
    std::vector<GroupLayout> layout;
    const auto filters = static_cast<double>(config.n_f);
    for (std::size_t n = 2; n <= config.l_g; ++n) {
        const auto area = static_cast<double>(n * n);
        layout.push_back({fmt::format("conv{}.kernel", n), {config.n_f, n, n}, area, filters * area});
        layout.push_back({fmt::format("conv{}.bias", n), {config.n_f}, 0.0, 0.0});
    }
    const std::size_t width = config.recurrent_input_dim();
    layout.push_back({"lstm.w_input", {4, width}, static_cast<double>(width), 4.0});
    layout.push_back({"lstm.w_recurrent", {4}, 1.0, 4.0});
    layout.push_back({"lstm.bias", {4}, 0.0, 0.0});
    return layout;
}

template <typename T>
Tensor<T> to_tensor(const Matrix& matrix) {
    std::vector<T> values(matrix.values.size());
    std::transform(matrix.values.begin(), matrix.values.end(), values.begin(),
                   [](double v) { return static_cast<T>(v); });
    return Tensor<T>({matrix.rows, matrix.cols}, std::move(values));
}

Stride conv_stride(const PacrrConfig& config, std::size_t n) {
    return config.mode == DistillMode::KWindow ? Stride{1, n} : Stride{1, 1};
}

}  // namespace

template <typename T>
std::size_t PacrrParams<T>::parameter_count() const {
    std::size_t count = 0;
    for (const auto& group : groups) {
        count += group.value.size();
    }
    return count;
}

template <typename T>
void PacrrParams<T>::zero_gradients() {
    for (auto& group : groups) {
        group.gradient.fill(T{0});
    }
}

template <typename T>
PacrrParams<T> init_params(const PacrrConfig& config) {
    config.validate();
    Rng rng(config.seed);
    PacrrParams<T> params;
    for (const auto& layout : param_layout(config)) {
        Tensor<T> value(layout.dims);
        if (layout.fan_out > 0.0) {
            const double limit = std::sqrt(6.0 / (layout.fan_in + layout.fan_out));
            for (auto& v : value.values()) {
                v = static_cast<T>(uniform_real(rng, -limit, limit));
            }
        }
        params.groups.emplace_back(layout.name, std::move(value));
    }
    return params;
}

template <typename T>
std::vector<std::int64_t> ScoreTrace<T>::routing_pattern() const {
    std::vector<std::int64_t> pattern;
    for (const auto& out : conv_out) {
        for (const T v : out.values()) {
            pattern.push_back(v > T{0} ? 1 : 0);
        }
    }
    for (const auto& pool : pooled) {
        pattern.insert(pattern.end(), pool.argmax.begin(), pool.argmax.end());
    }
    for (const auto& kmax : salient) {
        pattern.insert(pattern.end(), kmax.source.begin(), kmax.source.end());
    }
    return pattern;
}

template <typename T>
std::vector<Tensor<T>> ScoreTrace<T>::salient_signals() const {
    std::vector<Tensor<T>> signals;
    const std::size_t l_g = salient.size();
    const std::size_t n_s = l_g == 0 ? 0 : salient.front().values.dim(1);
    for (std::size_t i = 0; i < query_len; ++i) {
        Tensor<T> term({l_g, n_s});
        for (std::size_t n = 0; n < l_g; ++n) {
            for (std::size_t k = 0; k < n_s; ++k) {
                term.at(n, k) = salient[n].values.at(i, k);
            }
        }
        signals.push_back(std::move(term));
    }
    return signals;
}

template <typename T>
ScoreTrace<T> score_forward(const PacrrConfig& config, const PacrrParams<T>& params, const DistilledInput& input,
                            std::span<const double> idf) {
    if (input.per_n.size() != config.l_g) {
        throw std::invalid_argument(
            fmt::format("distilled input has {} n-gram matrices, config needs l_g = {}", input.per_n.size(), config.l_g));
    }
    for (const auto& matrix : input.per_n) {
        if (matrix.rows != config.l_q || matrix.cols != config.l_d) {
            throw std::invalid_argument(fmt::format("distilled matrix is {}x{}, config needs {}x{}", matrix.rows,
                                                    matrix.cols, config.l_q, config.l_d));
        }
    }
    if (input.mode != config.mode) {
        throw std::invalid_argument("distilled input mode does not match the model config");
    }
    if (input.query_len < 1 || input.query_len > config.l_q) {
        throw std::invalid_argument(fmt::format("query length {} outside [1, l_q = {}]", input.query_len, config.l_q));
    }
    if (idf.size() != input.query_len) {
        throw std::invalid_argument(
            fmt::format("idf vector has {} entries for a {}-term query", idf.size(), input.query_len));
    }
    if (params.groups.size() != 2 * config.conv_layers() + 3) {
        throw std::invalid_argument("parameter set does not match the config's l_g");
    }

    ScoreTrace<T> trace;
    trace.query_len = input.query_len;
    for (const auto& matrix : input.per_n) {
        trace.inputs.push_back(to_tensor<T>(matrix));
    }
    trace.salient.push_back(kmax_per_row(trace.inputs[0], config.n_s));
    for (std::size_t n = 2; n <= config.l_g; ++n) {
        trace.conv_out.push_back(conv2d(trace.inputs[n - 1], params.kernel(n), params.conv_bias(n), conv_stride(config, n)));
        trace.pooled.push_back(max_over_filters(trace.conv_out.back()));
        trace.salient.push_back(kmax_per_row(trace.pooled.back().values, config.n_s));
    }

    std::vector<T> idf_values(idf.begin(), idf.end());
    trace.idf_weights = softmax<T>(idf_values);

    const std::size_t width = config.recurrent_input_dim();
    trace.sequence = Tensor<T>({input.query_len, width});
    for (std::size_t i = 0; i < input.query_len; ++i) {
        std::size_t d = 0;
        for (std::size_t n = 0; n < config.l_g; ++n) {
            for (std::size_t k = 0; k < config.n_s; ++k) {
                trace.sequence.at(i, d++) = trace.salient[n].values.at(i, k);
            }
        }
        trace.sequence.at(i, d) = trace.idf_weights[i];
    }
    trace.recurrent = recurrent_sequence(trace.sequence, params.lstm());
    trace.rel = trace.recurrent.output();
    return trace;
}

template <typename T>
T score(const PacrrConfig& config, const PacrrParams<T>& params, const DistilledInput& input,
        std::span<const double> idf) {
    return score_forward(config, params, input, idf).rel;
}

template <typename T>
std::vector<Tensor<T>> score_gradients(const PacrrConfig& config, const PacrrParams<T>& params,
                                       const ScoreTrace<T>& trace, T loss_gradient) {
    std::vector<Tensor<T>> grads;
    grads.reserve(params.groups.size());
    for (const auto& group : params.groups) {
        grads.emplace_back(group.value.dims());
    }
    if (loss_gradient == T{0}) {
        return grads;
    }

    const auto lstm = recurrent_sequence_backward(trace.sequence, params.lstm(), trace.recurrent, loss_gradient);
    const std::size_t base = params.lstm_index();
    grads[base] = lstm.w_input;
    grads[base + 1] = lstm.w_recurrent;
    grads[base + 2] = lstm.bias;

    for (std::size_t n = 2; n <= config.l_g; ++n) {
        const auto& kmax = trace.salient[n - 1];
        Tensor<T> grad_salient(kmax.values.dims());
        for (std::size_t i = 0; i < trace.query_len; ++i) {
            for (std::size_t k = 0; k < config.n_s; ++k) {
                grad_salient.at(i, k) = lstm.inputs.at(i, (n - 1) * config.n_s + k);
            }
        }
        const auto& pooled = trace.pooled[n - 2];
        const auto& conv_out = trace.conv_out[n - 2];
        const auto grad_pooled = kmax_per_row_backward(kmax, pooled.values.dim(1), grad_salient);
        const auto grad_conv = max_over_filters_backward(pooled, conv_out.dim(0), grad_pooled);
        auto conv = conv2d_backward(trace.inputs[n - 1], params.kernel(n), conv_stride(config, n), conv_out, grad_conv);
        grads[PacrrParams<T>::kernel_index(n)] = std::move(conv.kernels);
        grads[PacrrParams<T>::conv_bias_index(n)] = std::move(conv.bias);
    }
    return grads;
}

template <typename T>
void accumulate_gradients(const PacrrConfig& config, PacrrParams<T>& params, const ScoreTrace<T>& trace,
                          T loss_gradient) {
    if (loss_gradient == T{0}) {
        return;
    }
    const auto grads = score_gradients(config, params, trace, loss_gradient);
    for (std::size_t g = 0; g < grads.size(); ++g) {
        auto target = params.groups[g].gradient.values();
        const auto source = grads[g].values();
        for (std::size_t i = 0; i < target.size(); ++i) {
            target[i] += source[i];
        }
    }
}

namespace {

class ByteWriter {
  public:
    void u32(std::uint32_t v) { put(v, 4); }
    void u64(std::uint64_t v) { put(v, 8); }
    void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
    void bytes(const std::string& s) { out_.insert(out_.end(), s.begin(), s.end()); }

    std::vector<std::uint8_t> take() { return std::move(out_); }
    const std::vector<std::uint8_t>& view() const { return out_; }

  private:
    void put(std::uint64_t v, int width) {
        for (int i = 0; i < width; ++i) {
            out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
        }
    }

    std::vector<std::uint8_t> out_;
};

class ByteReader {
  public:
    explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

    std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
    std::uint64_t u64() { return get(8); }
    float f32() { return std::bit_cast<float>(u32()); }
    std::string bytes(std::uint64_t count) {
        need(count);
        std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), static_cast<std::size_t>(count));
        pos_ += static_cast<std::size_t>(count);
        return s;
    }
    std::size_t remaining() const { return bytes_.size() - pos_; }

  private:
    void need(std::uint64_t count) const {
        if (count > remaining()) {
            throw DataError("checkpoint is truncated");
        }
    }
    std::uint64_t get(int width) {
        need(static_cast<std::uint64_t>(width));
        std::uint64_t v = 0;
        for (int i = 0; i < width; ++i) {
            v |= static_cast<std::uint64_t>(bytes_[pos_++]) << (8 * i);
        }
        return v;
    }

    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
};

std::uint32_t crc32_of(std::span<const std::uint8_t> bytes) {
    uLong crc = crc32(0L, Z_NULL, 0);
    crc = crc32(crc, bytes.data(), static_cast<uInt>(bytes.size()));
    return static_cast<std::uint32_t>(crc);
}

constexpr std::size_t kMagicLength = sizeof(kCheckpointMagic) - 1;

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const PacrrParams<float>& params, const PacrrConfig& config) {
    ByteWriter writer;
    writer.bytes(std::string(kCheckpointMagic, kMagicLength));
    writer.u32(kCheckpointVersion);
    const std::string header = to_json(config).dump();
    writer.u64(header.size());
    writer.bytes(header);
    writer.u32(static_cast<std::uint32_t>(params.groups.size()));
    for (const auto& group : params.groups) {
        writer.u32(static_cast<std::uint32_t>(group.name.size()));
        writer.bytes(group.name);
        writer.u32(static_cast<std::uint32_t>(group.value.rank()));
        for (const std::size_t d : group.value.dims()) {
            writer.u64(d);
        }
        writer.u64(group.value.size());
    }
    for (const auto& group : params.groups) {
        for (const float v : group.value.values()) {
            writer.f32(v);
        }
    }
    writer.u32(crc32_of(writer.view()));
    return writer.take();
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < kMagicLength + 4 + 4 ||
        std::memcmp(bytes.data(), kCheckpointMagic, kMagicLength) != 0) {
        throw DataError("not a PACRR checkpoint (bad magic)");
    }
    ByteReader reader(bytes.first(bytes.size() - 4));
    reader.bytes(kMagicLength);
    const std::uint32_t version = reader.u32();
    if (version != kCheckpointVersion) {
        throw DataError(fmt::format("unsupported checkpoint version {} (expected {})", version, kCheckpointVersion));
    }
    const std::uint32_t stored_crc = ByteReader(bytes.last(4)).u32();
    if (stored_crc != crc32_of(bytes.first(bytes.size() - 4))) {
        throw DataError("checkpoint checksum mismatch");
    }

    Checkpoint checkpoint;
    const std::uint64_t header_length = reader.u64();
    try {
        checkpoint.config = config_from_json(json::parse(reader.bytes(header_length)));
    } catch (const json::exception& e) {
        throw DataError(fmt::format("checkpoint config is not valid JSON: {}", e.what()));
    } catch (const ConfigError& e) {
        throw DataError(fmt::format("checkpoint config is invalid: {}", e.what()));
    }

    const auto layout = param_layout(checkpoint.config);
    const std::uint32_t count = reader.u32();
    if (count != layout.size()) {
        throw DataError(fmt::format("checkpoint holds {} tensors, config implies {}", count, layout.size()));
    }
    std::vector<std::vector<std::size_t>> dims(count);
    for (std::uint32_t t = 0; t < count; ++t) {
        const std::string name = reader.bytes(reader.u32());
        const std::uint32_t rank = reader.u32();
        for (std::uint32_t r = 0; r < rank; ++r) {
            dims[t].push_back(static_cast<std::size_t>(reader.u64()));
        }
        const std::uint64_t values = reader.u64();
        if (name != layout[t].name || dims[t] != layout[t].dims || values != Tensor<float>(dims[t]).size()) {
            throw DataError(fmt::format("checkpoint tensor '{}' ({}) does not match the expected '{}' ({})", name,
                                        format_dims(dims[t]), layout[t].name, format_dims(layout[t].dims)));
        }
    }
    for (std::uint32_t t = 0; t < count; ++t) {
        Tensor<float> value(dims[t]);
        for (auto& v : value.values()) {
            v = reader.f32();
        }
        checkpoint.params.groups.emplace_back(layout[t].name, std::move(value));
    }
    if (reader.remaining() != 0) {
        throw DataError("checkpoint has trailing bytes");
    }
    return checkpoint;
}

void save_params(const PacrrParams<float>& params, const PacrrConfig& config, const std::filesystem::path& path) {
    const auto bytes = encode_checkpoint(params, config);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw DataError(fmt::format("cannot write checkpoint {}", path.string()));
    }
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        throw DataError(fmt::format("failed writing checkpoint {}", path.string()));
    }
}

Checkpoint load_params(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw DataError(fmt::format("cannot open checkpoint {}", path.string()));
    }
    const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode_checkpoint(bytes);
}

#define PACRR_INSTANTIATE_MODEL(T)                                                                               \
    template struct PacrrParams<T>;                                                                              \
    template struct ScoreTrace<T>;                                                                               \
    template PacrrParams<T> init_params(const PacrrConfig&);                                                     \
    template ScoreTrace<T> score_forward(const PacrrConfig&, const PacrrParams<T>&, const DistilledInput&,        \
                                        std::span<const double>);                                                \
    template T score(const PacrrConfig&, const PacrrParams<T>&, const DistilledInput&, std::span<const double>); \
    template std::vector<Tensor<T>> score_gradients(const PacrrConfig&, const PacrrParams<T>&,                   \
                                                    const ScoreTrace<T>&, T);                                    \
    template void accumulate_gradients(const PacrrConfig&, PacrrParams<T>&, const ScoreTrace<T>&, T);

PACRR_INSTANTIATE_MODEL(float)
PACRR_INSTANTIATE_MODEL(double)

#undef PACRR_INSTANTIATE_MODEL

}  // namespace pacrr
