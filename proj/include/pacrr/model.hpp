#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "pacrr/neural.hpp"
#include "pacrr/simmat.hpp"

namespace pacrr {

struct PacrrConfig {
    std::size_t l_q = 16;
    std::size_t l_d = 768;
    std::size_t l_g = 3;
    std::size_t n_f = 32;
    std::size_t n_s = 2;
    DistillMode mode = DistillMode::FirstK;
    double learning_rate = 0.001;
    std::uint64_t seed = 1;

    /// Throws ConfigError on a violated invariant.
    void validate() const;

    std::size_t recurrent_input_dim() const { return l_g * n_s + 1; }
    std::size_t conv_layers() const { return l_g - 1; }

    bool operator==(const PacrrConfig&) const = default;
};

nlohmann::json to_json(const PacrrConfig& config);
PacrrConfig config_from_json(const nlohmann::json& json);

/// Trainable weights: per n in 2..l_g a kernel (n_f x n x n) and bias (n_f),
/// then the recurrent cell's input weights (4 x D), recurrent weights (4) and
/// biases (4).
template <typename T>
struct PacrrParams {
    std::vector<ParamGroup<T>> groups;

    static std::size_t kernel_index(std::size_t n) { return 2 * (n - 2); }
    static std::size_t conv_bias_index(std::size_t n) { return 2 * (n - 2) + 1; }
    std::size_t lstm_index() const { return groups.size() - 3; }

    const Tensor<T>& kernel(std::size_t n) const { return groups[kernel_index(n)].value; }
    const Tensor<T>& conv_bias(std::size_t n) const { return groups[conv_bias_index(n)].value; }
    LstmWeights<T> lstm() const {
        const std::size_t base = lstm_index();
        return {groups[base].value, groups[base + 1].value, groups[base + 2].value};
    }

    std::size_t parameter_count() const;
    void zero_gradients();

    template <typename U>
    PacrrParams<U> cast() const {
        PacrrParams<U> out;
        for (const auto& group : groups) {
            out.groups.emplace_back(group.name, group.value.template cast<U>());
        }
        return out;
    }
};

/// Glorot-uniform kernels and recurrent weights, zero biases, fully determined by config.seed.
template <typename T>
PacrrParams<T> init_params(const PacrrConfig& config);

/// Intermediate state of one forward pass; feeds score_gradients.
template <typename T>
struct ScoreTrace {
    T rel{};
    std::size_t query_len = 0;
    std::vector<Tensor<T>> inputs;        // per n = 1..l_g, l_q x l_d
    std::vector<Tensor<T>> conv_out;      // per n = 2..l_g, n_f x l_q x W_n
    std::vector<FilterMax<T>> pooled;     // per n = 2..l_g
    std::vector<KMax<T>> salient;         // per n = 1..l_g
    std::vector<T> idf_weights;           // softmax over real query terms
    Tensor<T> sequence;                   // |q| x D recurrent input
    LstmTrace<T> recurrent;

    /// Discrete decisions of the pass, for excluding kinks from gradient checks.
    std::vector<std::int64_t> routing_pattern() const;

    /// Per real query term, the l_g x n_s salient signals (row 0 = unigram).
    std::vector<Tensor<T>> salient_signals() const;
};

template <typename T>
ScoreTrace<T> score_forward(const PacrrConfig& config, const PacrrParams<T>& params, const DistilledInput& input,
                            std::span<const double> idf);

/// rel(q, d) in (-1, 1).
template <typename T>
T score(const PacrrConfig& config, const PacrrParams<T>& params, const DistilledInput& input,
        std::span<const double> idf);

/// Gradients of loss w.r.t. every parameter group, given d loss / d rel.
template <typename T>
std::vector<Tensor<T>> score_gradients(const PacrrConfig& config, const PacrrParams<T>& params,
                                       const ScoreTrace<T>& trace, T loss_gradient);

template <typename T>
void accumulate_gradients(const PacrrConfig& config, PacrrParams<T>& params, const ScoreTrace<T>& trace,
                          T loss_gradient);

struct Checkpoint {
    PacrrConfig config;
    PacrrParams<float> params;
};

inline constexpr char kCheckpointMagic[] = "PACRR1";
inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Serialized checkpoint bytes:
///   magic "PACRR1" | u32 version | u64 config length | config JSON (UTF-8)
///   | u32 tensor count | per tensor: u32 name length, name, u32 rank, u64 dims..., u64 value count
///   | float32 values of every tensor in header order | u32 CRC-32 of everything before it.
/// All integers and floats little-endian.
std::vector<std::uint8_t> encode_checkpoint(const PacrrParams<float>& params, const PacrrConfig& config);
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes);

void save_params(const PacrrParams<float>& params, const PacrrConfig& config, const std::filesystem::path& path);
Checkpoint load_params(const std::filesystem::path& path);

}  // namespace pacrr
