#include "uwgan/fid.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <optional>

#include "uwgan/error.hpp"
#include "uwgan/rng.hpp"
#include "uwgan/trainer.hpp"

namespace uwgan {

void FeatureStats::validate() const
{
    if (n < 2) {
        throw ValidationError("feature stats need at least 2 samples");
    }
    if (cov.rows() != mu.size() || cov.cols() != mu.size()) {
        throw ValidationError("feature stats: covariance and mean dimensions differ");
    }
    const double scale = std::max(1.0, cov.cwiseAbs().maxCoeff());
    if ((cov - cov.transpose()).cwiseAbs().maxCoeff() > 1e-8 * scale) {
        throw ValidationError("feature stats: covariance is not symmetric");
    }
}

FeatureStats feature_stats(const Eigen::MatrixXd& f)
{
    if (f.rows() < 2) {
        throw ValidationError("feature_stats needs at least 2 rows, got " + std::to_string(f.rows()));
    }
    FeatureStats s;
    s.n = static_cast<std::size_t>(f.rows());
    s.mu = f.colwise().mean().transpose();
    const Eigen::MatrixXd centered = f.rowwise() - s.mu.transpose();
    s.cov = (centered.transpose() * centered) / static_cast<double>(f.rows() - 1);
    s.cov = 0.5 * (s.cov + s.cov.transpose()).eval();
    return s;
}

FeatureAccumulator::FeatureAccumulator(int dim) : mean_(Eigen::VectorXd::Zero(dim)), scatter_(Eigen::MatrixXd::Zero(dim, dim))
{
}

void FeatureAccumulator::add(const Eigen::MatrixXd& rows)
{
    if (rows.rows() == 0) {
        return;
    }
    if (rows.cols() != mean_.size()) {
        throw ValidationError("feature accumulator: dimension mismatch");
    }
    FeatureAccumulator chunk(static_cast<int>(mean_.size()));
    chunk.n_ = static_cast<std::size_t>(rows.rows());
    chunk.mean_ = rows.colwise().mean().transpose();
    const Eigen::MatrixXd centered = rows.rowwise() - chunk.mean_.transpose();
    chunk.scatter_ = centered.transpose() * centered;
    merge(chunk);
}

void FeatureAccumulator::merge(const FeatureAccumulator& o)
{
    if (o.mean_.size() != mean_.size()) {
        throw ValidationError("feature accumulator: dimension mismatch");
    }
    if (o.n_ == 0) {
        return;
    }
    if (n_ == 0) {
        *this = o;
        return;
    }
    const double na = static_cast<double>(n_);
    const double nb = static_cast<double>(o.n_);
    const double n = na + nb;
    const Eigen::VectorXd delta = o.mean_ - mean_;
    mean_ += delta * (nb / n);
    scatter_ += o.scatter_ + (delta * delta.transpose()) * (na * nb / n);
    n_ += o.n_;
}

FeatureStats FeatureAccumulator::stats() const
{
    if (n_ < 2) {
        throw ValidationError("feature stats need at least 2 samples");
    }
    FeatureStats s;
    s.n = n_;
    s.mu = mean_;
    s.cov = scatter_ / static_cast<double>(n_ - 1);
    s.cov = 0.5 * (s.cov + s.cov.transpose()).eval();
    return s;
}

namespace {

bool symmetric(const Eigen::MatrixXd& a, double tol)
{
    if (a.rows() != a.cols()) {
        return false;
    }
    if (a.size() == 0) {
        return true;
    }
    const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
    return (a - a.transpose()).cwiseAbs().maxCoeff() <= tol * scale;
}

// nullopt when the solver does not converge
std::optional<Eigen::MatrixXd> try_sqrtm(const Eigen::MatrixXd& a)
{
    const Eigen::MatrixXd sym = 0.5 * (a + a.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
    if (es.info() != Eigen::Success || !es.eigenvalues().allFinite()) {
        return std::nullopt;
    }
    const Eigen::VectorXd root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    Eigen::MatrixXd s = es.eigenvectors() * root.asDiagonal() * es.eigenvectors().transpose();
    return 0.5 * (s + s.transpose());
}

std::optional<double> try_trace_term(const Eigen::MatrixXd& c1, const Eigen::MatrixXd& c2)
{
    const auto r1 = try_sqrtm(c1);
    if (!r1) {
        return std::nullopt;
    }
    Eigen::MatrixXd m = (*r1) * c2 * (*r1);
    m = 0.5 * (m + m.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success || !es.eigenvalues().allFinite()) {
        return std::nullopt;
    }
    return es.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();
}

}  // namespace

Eigen::MatrixXd sqrtm_psd(const Eigen::MatrixXd& a, double sym_tol)
{
    if (!symmetric(a, sym_tol)) {
        throw ValidationError("sqrtm_psd: matrix is not symmetric");
    }
    auto s = try_sqrtm(a);
    if (!s) {
        throw NumericalError("sqrtm_psd: eigensolver did not converge");
    }
    return *s;
}

FrechetResult frechet_distance_ex(const FeatureStats& a, const FeatureStats& b, double epsilon)
{
    if (a.dim() != b.dim() || a.cov.rows() != a.dim() || b.cov.rows() != b.dim()) {
        throw ValidationError("frechet_distance: dimension mismatch (" + std::to_string(a.dim()) + " vs " +
                              std::to_string(b.dim()) + ")");
    }
    FrechetResult r;
    const double mean_term = (a.mu - b.mu).squaredNorm();
    Eigen::MatrixXd c1 = a.cov;
    Eigen::MatrixXd c2 = b.cov;
    auto tr = try_trace_term(c1, c2);
    if (!tr) {
        c1.diagonal().array() += epsilon;
        c2.diagonal().array() += epsilon;
        r.epsilon_applied = true;
        tr = try_trace_term(c1, c2);
        if (!tr) {
            throw NumericalError("frechet_distance: eigensolve failed even after the diagonal adjustment");
        }
    }
    double d = mean_term + c1.trace() + c2.trace() - 2.0 * (*tr);
    if (d < 0.0 && d > -1e-8) {
        d = 0.0;
    }
    r.distance = d;
    return r;
}

double frechet_distance(const FeatureStats& a, const FeatureStats& b)
{
    return frechet_distance_ex(a, b).distance;
}

// -------------------------------------------------------------- embedders

RandomConvEmbedder::RandomConvEmbedder(std::uint64_t seed, int input_size) : input_size_(input_size)
{
    if (input_size < 16) {
        throw ValidationError("random conv embedder input must be at least 16 px");
    }
    nn::Sequential s;
    s.add<nn::Conv2d>(3, 32, 3, 2, 1, true);
    s.add<nn::ReLU>();
    s.add<nn::Conv2d>(32, 64, 3, 2, 1, true);
    s.add<nn::ReLU>();
    s.add<nn::Conv2d>(64, 64, 3, 2, 1, true);
    s.add<nn::ReLU>();
    net_ = nn::Network("random_conv64", std::move(s));

    Rng rng(derive_seed(seed, {0xf1d}));
    for (auto& ref : net_.parameters()) {
        auto& v = ref.param->value;
        if (ref.name.ends_with("bias")) {
            for (auto& x : v.values()) {
                x = uniform(rng, -0.1, 0.1);
            }
            continue;
        }
        std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / static_cast<double>(v.shape().per_item())));
        for (auto& x : v.values()) {
            x = normal(rng);
        }
    }
}

Eigen::MatrixXd RandomConvEmbedder::embed_batch(std::span<const DomainImage> items) const
{
    std::vector<ImageTensor> images;
    images.reserve(items.size());
    for (const auto& item : items) {
        images.push_back(fit_square(item.image(), input_size_, ResizePolicy::short_side_crop));
    }
    const Tensor y = net_.infer(to_model_batch(images));
    const Shape& s = y.shape();
    Eigen::MatrixXd out(s.n, s.c);
    const auto plane = static_cast<double>(s.plane());
    for (int n = 0; n < s.n; ++n) {
        for (int c = 0; c < s.c; ++c) {
            double acc = 0.0;
            for (int h = 0; h < s.h; ++h) {
                for (int w = 0; w < s.w; ++w) {
                    acc += y.at(n, c, h, w);
                }
            }
            out(n, c) = acc / plane;
        }
    }
    return out;
}

PrecomputedEmbedder::PrecomputedEmbedder(std::string name, const std::filesystem::path& csv, int expected_dim)
    : name_(std::move(name))
{
    std::ifstream is(csv);
    if (!is) {
        throw RuntimeFailure("cannot open feature file " + csv.string());
    }
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty() || line.rfind("source_id", 0) == 0) {
            continue;
        }
        const auto comma = line.find(',');
        if (comma == std::string::npos) {
            throw ValidationError(csv.string() + ":" + std::to_string(lineno) + ": expected source_id,features...");
        }
        std::vector<double> row;
        const char* p = line.data() + comma + 1;
        const char* end = line.data() + line.size();
        while (p < end) {
            double v = 0.0;
            auto res = std::from_chars(p, end, v);
            if (res.ec != std::errc()) {
                throw ValidationError(csv.string() + ":" + std::to_string(lineno) + ": bad number");
            }
            row.push_back(v);
            p = res.ptr;
            if (p < end && *p == ',') {
                ++p;
            }
        }
        if (dim_ == 0) {
            dim_ = static_cast<int>(row.size());
        } else if (static_cast<int>(row.size()) != dim_) {
            throw ValidationError(csv.string() + ":" + std::to_string(lineno) + ": expected " + std::to_string(dim_) +
                                  " features, got " + std::to_string(row.size()));
        }
        rows_[line.substr(0, comma)] = std::move(row);
    }
    if (rows_.empty()) {
        throw ValidationError("feature file " + csv.string() + " has no rows");
    }
    if (expected_dim > 0 && dim_ != expected_dim) {
        throw ValidationError("feature file " + csv.string() + " has " + std::to_string(dim_) + " columns, " +
                              name_ + " expects " + std::to_string(expected_dim));
    }
}

Eigen::MatrixXd PrecomputedEmbedder::embed_batch(std::span<const DomainImage> items) const
{
    Eigen::MatrixXd out(static_cast<Eigen::Index>(items.size()), dim_);
    for (std::size_t i = 0; i < items.size(); ++i) {
        auto it = rows_.find(items[i].source_id);
        if (it == rows_.end()) {
            throw ValidationError("no precomputed features for '" + items[i].source_id + "'");
        }
        out.row(static_cast<Eigen::Index>(i)) = Eigen::Map<const Eigen::RowVectorXd>(it->second.data(), dim_);
    }
    return out;
}

std::unique_ptr<Embedder> make_embedder(const std::string& kind, const std::filesystem::path& features_csv,
                                        std::uint64_t seed)
{
    if (kind == "random_conv64") {
        return std::make_unique<RandomConvEmbedder>(seed);
    }
    if (kind == "inception_pool3" || kind == "precomputed") {
        if (features_csv.empty()) {
            throw ValidationError("embedder '" + kind + "' needs a features CSV");
        }
        return std::make_unique<PrecomputedEmbedder>(kind, features_csv,
                                                     kind == "inception_pool3" ? kReferenceFeatureDim : -1);
    }
    throw ValidationError("unknown embedder '" + kind + "' (random_conv64 | inception_pool3 | precomputed)");
}

Eigen::MatrixXd embed(const DomainDataset& images, const Embedder& e, int batch)
{
    if (images.size() < 2) {
        throw ValidationError("embed needs at least 2 images, got " + std::to_string(images.size()));
    }
    if (batch < 1) {
        throw ValidationError("embed batch must be >= 1");
    }
    Eigen::MatrixXd out(static_cast<Eigen::Index>(images.size()), e.dim());
    const auto& items = images.items();
    for (std::size_t begin = 0; begin < items.size(); begin += static_cast<std::size_t>(batch)) {
        const std::size_t count = std::min(items.size() - begin, static_cast<std::size_t>(batch));
        const Eigen::MatrixXd f = e.embed_batch(std::span<const DomainImage>(items.data() + begin, count));
        out.middleRows(static_cast<Eigen::Index>(begin), static_cast<Eigen::Index>(count)) = f;
    }
    return out;
}

std::vector<FidRow> fid_report(const std::vector<FidPair>& pairs, const Embedder& e, int batch)
{
    std::vector<FidRow> rows;
    for (const auto& p : pairs) {
        if (!p.a || !p.b) {
            throw ValidationError("fid pair '" + p.name + "' is missing a set");
        }
        const FeatureStats sa = feature_stats(embed(*p.a, e, batch));
        const FeatureStats sb = feature_stats(embed(*p.b, e, batch));
        const FrechetResult r = frechet_distance_ex(sa, sb);
        rows.push_back({p.name, r.distance, p.a->size(), p.b->size(), e.name(), r.epsilon_applied});
    }
    return rows;
}

void write_fid_csv(const std::filesystem::path& path, const std::vector<FidRow>& rows)
{
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    std::ofstream os(path, std::ios::trunc);
    if (!os) {
        throw RuntimeFailure("cannot write " + path.string());
    }
    os << "pair,fid,n_a,n_b,embedder,epsilon_applied\n";
    for (const auto& r : rows) {
        char buf[32];
        auto res = std::to_chars(buf, buf + sizeof(buf), r.fid);
        os << r.pair << ',' << std::string_view(buf, res.ptr - buf) << ',' << r.n_a << ',' << r.n_b << ','
           << r.embedder << ',' << (r.epsilon_applied ? "true" : "false") << '\n';
    }
}

nlohmann::json to_json(const std::vector<FidRow>& rows)
{
    nlohmann::json j = nlohmann::json::array();
    for (const auto& r : rows) {
        j.push_back({{"pair", r.pair},
                     {"fid", r.fid},
                     {"n_a", r.n_a},
                     {"n_b", r.n_b},
                     {"embedder", r.embedder},
                     {"epsilon_applied", r.epsilon_applied}});
    }
    return j;
}

}  // namespace uwgan
