#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "uwgan/dataset.hpp"
#include "uwgan/nn/network.hpp"

namespace uwgan {

struct FeatureStats {
    Eigen::VectorXd mu;
    Eigen::MatrixXd cov;
    std::size_t n = 0;

    int dim() const noexcept { return static_cast<int>(mu.size()); }
    void validate() const;
};

/// Column means and the unbiased covariance (divisor N - 1), symmetrized.
FeatureStats feature_stats(const Eigen::MatrixXd& features);

/// Streaming mean / scatter with a commutative merge, for parallel or
/// chunked embedding.
class FeatureAccumulator {
public:
    explicit FeatureAccumulator(int dim);

    void add(const Eigen::MatrixXd& rows);
    void merge(const FeatureAccumulator& other);
    std::size_t count() const noexcept { return n_; }
    FeatureStats stats() const;

private:
    std::size_t n_ = 0;
    Eigen::VectorXd mean_;
    Eigen::MatrixXd scatter_;
};

/// Principal square root of a symmetric PSD matrix by eigendecomposition;
/// negative eigenvalues are clamped to zero. Throws if `a` is not symmetric
/// within `sym_tol` (relative to its largest entry) or the solver fails.
Eigen::MatrixXd sqrtm_psd(const Eigen::MatrixXd& a, double sym_tol = 1e-8);

struct FrechetResult {
    double distance = 0.0;
    bool epsilon_applied = false;
};

/// |mu1 - mu2|^2 + tr(C1 + C2 - 2 sqrt(sqrt(C1) C2 sqrt(C1))). If an
/// eigensolve fails, `epsilon` is added to both diagonals and the
/// computation is retried once.
FrechetResult frechet_distance_ex(const FeatureStats& a, const FeatureStats& b, double epsilon = 1e-6);
double frechet_distance(const FeatureStats& a, const FeatureStats& b);

class Embedder {
public:
    virtual ~Embedder() = default;
    virtual std::string name() const = 0;
    virtual int dim() const = 0;
    /// One row per item, in order.
    virtual Eigen::MatrixXd embed_batch(std::span<const DomainImage> items) const = 0;
};

/// 64-d features from a fixed-seed random conv stack with global average
/// pooling. Cheap, deterministic, only good for relative comparisons.
class RandomConvEmbedder final : public Embedder {
public:
    explicit RandomConvEmbedder(std::uint64_t seed = 20240611, int input_size = 64);

    std::string name() const override { return "random_conv64"; }
    int dim() const override { return 64; }
    Eigen::MatrixXd embed_batch(std::span<const DomainImage> items) const override;

private:
    nn::Network net_;
    int input_size_;
};

inline constexpr int kReferenceFeatureDim = 2048;

/// Features computed elsewhere (e.g. the pooled activations of the standard
/// pretrained FID network) and stored as CSV rows `source_id,f0,...,f{d-1}`.
class PrecomputedEmbedder final : public Embedder {
public:
    PrecomputedEmbedder(std::string name, const std::filesystem::path& csv, int expected_dim = -1);

    std::string name() const override { return name_; }
    int dim() const override { return dim_; }
    Eigen::MatrixXd embed_batch(std::span<const DomainImage> items) const override;

private:
    std::string name_;
    int dim_ = 0;
    std::unordered_map<std::string, std::vector<double>> rows_;
};

/// Builds "random_conv64", or "inception_pool3" / "precomputed" from a
/// feature CSV (the former checks for 2048 columns).
std::unique_ptr<Embedder> make_embedder(const std::string& kind, const std::filesystem::path& features_csv = {},
                                        std::uint64_t seed = 20240611);

/// N x d feature matrix, row i for item i.
Eigen::MatrixXd embed(const DomainDataset& images, const Embedder& e, int batch = 16);

struct FidPair {
    std::string name;
    const DomainDataset* a = nullptr;
    const DomainDataset* b = nullptr;
};

struct FidRow {
    std::string pair;
    double fid = 0.0;
    std::size_t n_a = 0;
    std::size_t n_b = 0;
    std::string embedder;
    bool epsilon_applied = false;
};

std::vector<FidRow> fid_report(const std::vector<FidPair>& pairs, const Embedder& e, int batch = 16);

void write_fid_csv(const std::filesystem::path& path, const std::vector<FidRow>& rows);
nlohmann::json to_json(const std::vector<FidRow>& rows);

}  // namespace uwgan
