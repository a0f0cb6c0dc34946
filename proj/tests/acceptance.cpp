// Acceptance suite: one PASS/FAIL line per criterion, tolerances pinned here.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "fixtures.hpp"
#include "oracle.hpp"
#include "uwgan/augment.hpp"
#include "uwgan/error.hpp"
#include "uwgan/fid.hpp"
#include "uwgan/losses.hpp"
#include "uwgan/models.hpp"
#include "uwgan/pipeline.hpp"
#include "uwgan/trainer.hpp"

using namespace uwgan;
namespace fs = std::filesystem;
using uwgan::testing::TempDir;

namespace {

struct Verdict {
    bool pass = false;
    std::string detail;
};

struct Criterion {
    std::string name;
    std::string tolerance;
    std::function<Verdict()> run;
};

std::string fmt(double v)
{
    std::ostringstream os;
    os.precision(4);
    os << v;
    return os.str();
}

Eigen::MatrixXd random_spd(int d, std::uint64_t seed)
{
    Rng rng(seed);
    std::normal_distribution<double> n(0.0, 1.0);
    Eigen::MatrixXd a(d, d);
    for (int i = 0; i < d; ++i) {
        for (int j = 0; j < d; ++j) {
            a(i, j) = n(rng);
        }
    }
    Eigen::MatrixXd s = a * a.transpose() / d;
    s.diagonal().array() += 1e-3;
    return 0.5 * (s + s.transpose());
}

FeatureStats stats_of(Eigen::VectorXd mu, Eigen::MatrixXd cov)
{
    FeatureStats s;
    s.mu = std::move(mu);
    s.cov = std::move(cov);
    s.n = 100;
    return s;
}

// ------------------------------------------------------------------

Verdict frechet_closed_forms()
{
    constexpr double tol = 1e-6;
    double worst = 0.0;
    auto track = [&](double got, double want) { worst = std::max(worst, std::abs(got - want)); };
    for (int d : {2, 8, 32}) {
        Eigen::VectorXd mu = Eigen::VectorXd::LinSpaced(d, -1.0, 2.0);
        const auto s = stats_of(mu, random_spd(d, 11 + d));
        track(frechet_distance(s, s), 0.0);
        const auto c4 = stats_of(mu, 4.0 * Eigen::MatrixXd::Identity(d, d));
        const auto c1 = stats_of(mu, Eigen::MatrixXd::Identity(d, d));
        track(frechet_distance(c4, c1), d);
        // equal covariance: only the mean term survives
        Eigen::VectorXd shift = Eigen::VectorXd::Constant(d, 0.5);
        const auto b = stats_of(mu + shift, s.cov);
        track(frechet_distance(s, b), shift.squaredNorm());
    }
    const auto a = stats_of(Eigen::Vector2d(0.0, 0.0), Eigen::Matrix2d::Identity());
    const auto b = stats_of(Eigen::Vector2d(3.0, 4.0), Eigen::Matrix2d::Identity());
    track(frechet_distance(a, b), 25.0);
    return {worst < tol, "max abs error " + fmt(worst)};
}

Verdict sqrtm_against_oracle()
{
    constexpr double tol = 1e-6;
    double worst_sq = 0.0, worst_or = 0.0;
    for (int i = 0; i < 50; ++i) {
        const int d = 1 + (i * 13) % 64;
        const Eigen::MatrixXd a = random_spd(d, 1000 + i);
        const Eigen::MatrixXd s = sqrtm_psd(a);
        worst_sq = std::max(worst_sq, (s * s - a).norm() / a.norm());
        const Eigen::MatrixXd o = uwgan::testing::oracle_sqrtm(a);
        worst_or = std::max(worst_or, (s - o).norm() / o.norm());
    }
    return {worst_sq < tol && worst_or < tol,
            "max |S*S-A|/|A| " + fmt(worst_sq) + ", max |S-oracle|/|oracle| " + fmt(worst_or)};
}

Verdict fid_identity_and_monotone()
{
    constexpr double tol = 1e-6;
    const DomainDataset a = uwgan::testing::synthetic_domain(Domain::lab, 128, 64, 31);
    RandomConvEmbedder e;
    std::vector<DomainDataset> noisy;
    const std::vector<double> sigmas{0.0, 0.05, 0.1, 0.2};
    for (std::size_t k = 0; k < sigmas.size(); ++k) {
        DomainDataset d(a.class_names());
        Rng rng(derive_seed(77, {k}));
        for (const auto& item : a) {
            DomainImage c = item;
            c.pixels = std::make_shared<ImageTensor>(add_gaussian_noise(item.image(), sigmas[k], rng));
            d.add(c);
        }
        noisy.push_back(std::move(d));
    }
    std::vector<FidPair> pairs{{"identity", &a, &a}};
    for (std::size_t k = 0; k < sigmas.size(); ++k) {
        pairs.push_back({"sigma_" + fmt(sigmas[k]), &a, &noisy[k]});
    }
    const auto rows = fid_report(pairs, e);
    bool ok = rows[0].fid < tol;
    std::string detail = "FID(A,A) " + fmt(rows[0].fid) + "; sigma curve";
    for (std::size_t k = 1; k < rows.size(); ++k) {
        detail += " " + fmt(rows[k].fid);
        if (k > 1 && rows[k].fid < rows[k - 1].fid) {
            ok = false;
        }
    }
    return {ok, detail};
}

struct ToyGan {
    nn::Network g_uw = uwgan::testing::toy_generator(11);
    nn::Network g_lab = uwgan::testing::toy_generator(12);
    nn::Network d_uw = uwgan::testing::toy_discriminator(13);
    nn::Network d_lab = uwgan::testing::toy_discriminator(14);
    Tensor x_uw = uwgan::testing::random_tensor({2, 3, 4, 4}, 15);
    Tensor x_lab = uwgan::testing::random_tensor({2, 3, 4, 4}, 16);
    void zero()
    {
        for (auto* n : {&g_uw, &g_lab, &d_uw, &d_lab}) {
            n->zero_grad();
        }
    }
    GeneratorPass pass(bool backprop)
    {
        return generator_objective(g_uw, g_lab, d_uw, d_lab, x_uw, x_lab, 10.0, backprop);
    }
};

Verdict loss_gradients()
{
    constexpr double tol = 1e-4;
    constexpr double h = 1e-5;
    double worst = 0.0;
    std::size_t checked = 0;
    auto note = [&](const uwgan::testing::GradCheck& g) {
        worst = std::max(worst, g.max_rel);
        checked += g.checked;
    };

    // score-space gradients of the individual terms
    Tensor t = uwgan::testing::random_tensor({2, 1, 3, 3}, 1);
    Tensor r = uwgan::testing::random_tensor({2, 1, 3, 3}, 2);
    Tensor gt, gr;
    adversarial_loss(t, r, &gt, &gr);
    const Tensor nt = uwgan::testing::numeric_gradient([&] { return adversarial_loss(t, r); }, t, h);
    const Tensor nr = uwgan::testing::numeric_gradient([&] { return adversarial_loss(t, r); }, r, h);
    Tensor x = uwgan::testing::random_tensor({1, 3, 3, 3}, 3);
    Tensor y = uwgan::testing::random_tensor({1, 3, 3, 3}, 4);
    Tensor gy;
    cycle_loss(x, y, &gy);
    const Tensor ny = uwgan::testing::numeric_gradient([&] { return cycle_loss(x, y); }, y, h);
    for (std::size_t i = 0; i < t.size(); ++i) {
        worst = std::max({worst, uwgan::testing::rel_error(gt[i], nt[i]), uwgan::testing::rel_error(gr[i], nr[i])});
    }
    for (std::size_t i = 0; i < y.size(); ++i) {
        worst = std::max(worst, uwgan::testing::rel_error(gy[i], ny[i]));
    }
    checked += 2 * t.size() + y.size();

    ToyGan g;
    const std::size_t params =
        g.g_uw.parameter_count() + g.g_lab.parameter_count() + g.d_uw.parameter_count() + g.d_lab.parameter_count();
    g.zero();
    g.pass(true);
    note(uwgan::testing::check_param_grads([&] { return g.pass(false).record.total; }, {&g.g_uw, &g.g_lab}, h));
    note(uwgan::testing::check_param_grads([&] { return g.pass(false).objective; }, {&g.g_uw, &g.g_lab}, h));
    const Tensor fake = g.g_uw.infer(g.x_lab);
    g.d_uw.zero_grad();
    discriminator_objective(g.d_uw, g.x_uw, fake, true);
    note(uwgan::testing::check_param_grads([&] { return discriminator_objective(g.d_uw, g.x_uw, fake, false); },
                                           {&g.d_uw}, h));
    return {worst < tol && params <= 100,
            std::to_string(params) + " params, " + std::to_string(checked) + " entries, max rel " + fmt(worst)};
}

Verdict classifier_shapes()
{
    const auto m = build_classifier(0.0, 1);
    struct Row {
        const char* layer;
        int filters;
        int side;
    };
    // ReLU rows carry the same shape as their conv and are left out
    const std::vector<Row> want{{"Input", 3, 150},    {"Conv2d", 16, 150},     {"MaxPool2d", 16, 75},
                                {"Conv2d", 32, 75},   {"MaxPool2d", 32, 37},   {"Conv2d", 64, 37},
                                {"MaxPool2d", 64, 18}, {"Flatten", 20736, 1}, {"Dense", 128, 1},
                                {"Dense", 5, 1}};
    std::vector<LayerShape> got;
    for (const auto& row : m.layer_table()) {
        if (row.layer != "ReLU") {
            got.push_back(row);
        }
    }
    bool ok = got.size() == want.size();
    for (std::size_t i = 0; ok && i < want.size(); ++i) {
        ok = got[i].layer == want[i].layer && got[i].shape == Shape{1, want[i].filters, want[i].side, want[i].side};
    }
    const Tensor p = classifier_forward(m, uwgan::testing::random_tensor({4, 3, 150, 150}, 2, 0.0, 1.0));
    double worst = 0.0;
    for (int n = 0; n < 4; ++n) {
        double s = 0.0;
        for (int c = 0; c < 5; ++c) {
            s += p.at(n, c, 0, 0);
        }
        worst = std::max(worst, std::abs(s - 1.0));
    }
    return {ok && worst < 1e-6 && p.shape() == Shape{4, 5, 1, 1},
            std::string(ok ? "layer table matches" : "layer table differs") + ", max |row sum - 1| " + fmt(worst)};
}

Verdict toy_cyclegan()
{
    TrainConfig tc;
    tc.image_size = 64;
    tc.batch_size = 2;
    tc.generator_channels = 8;
    tc.residual_blocks = 2;
    tc.discriminator_channels = 8;
    tc.discriminator_layers = 3;
    tc.epochs = 1000;
    tc.max_steps = 200;
    tc.seed = 2024;
    const auto uw = uwgan::testing::synthetic_domain(Domain::uw, 8, 64, 101);
    const auto lab = uwgan::testing::synthetic_domain(Domain::lab, 8, 64, 202);
    const auto [state, report] = train_cyclegan(tc, uw, lab);
    const auto& log = report.log;
    if (log.size() != 200) {
        return {false, "logged " + std::to_string(log.size()) + " steps"};
    }
    auto window = [&](std::size_t from, std::size_t n, auto field) {
        double s = 0.0;
        for (std::size_t i = from; i < from + n; ++i) {
            s += field(log[i].record);
        }
        return s / static_cast<double>(n);
    };
    auto total = [](const LossRecord& r) { return r.total; };
    auto cycle = [](const LossRecord& r) { return r.cycle_total; };
    const double start = window(0, 10, total);
    const double end = window(190, 10, total);
    const double drop = 1.0 - end / start;
    bool monotone = true;
    std::string windows;
    for (std::size_t w = 0; w < 10; ++w) {
        const double v = window(w * 20, 20, cycle);
        windows += (w ? " " : "") + fmt(v);
        if (w > 0 && v > window((w - 1) * 20, 20, cycle)) {
            monotone = false;
        }
    }
    return {drop >= 0.5 && monotone, "total " + fmt(start) + " -> " + fmt(end) + " (drop " + fmt(100 * drop) +
                                          "%), cycle windows " + windows + ", " + fmt(report.wall_seconds) + " s"};
}

Verdict classifier_probe()
{
    const auto objs = uwgan::testing::synthetic_objects(10, 48, 5);
    ClassifierTrainConfig cc;
    cc.epochs = 100;
    cc.batch_size = 10;
    cc.seed = 3;
    cc.stop_at_accuracy = 0.95;
    const auto [model, report] = train_classifier(cc, objs, 0.0);
    const auto& h = report.history;
    const double acc = h.empty() ? 0.0 : h.back().accuracy;
    return {objs.size() == 50 && acc >= 0.95,
            std::to_string(report.train_size) + " train crops, train accuracy " + fmt(acc) + " after " +
                std::to_string(h.size()) + " epochs, " + fmt(report.wall_seconds) + " s"};
}

std::size_t count_not_equal(const ImageTensor& img, double v)
{
    std::size_t n = 0;
    for (int y = 0; y < img.height(); ++y) {
        for (int x = 0; x < img.width(); ++x) {
            bool changed = false;
            for (int c = 0; c < img.channels(); ++c) {
                changed |= img.at(y, x, c) != v;
            }
            n += changed;
        }
    }
    return n;
}

bool files_identical(const fs::path& a, const fs::path& b)
{
    std::ifstream fa(a, std::ios::binary), fb(b, std::ios::binary);
    const std::string sa((std::istreambuf_iterator<char>(fa)), {});
    const std::string sb((std::istreambuf_iterator<char>(fb)), {});
    return fa.good() == fb.good() && sa == sb && !sa.empty();
}

Verdict augmentation_contracts()
{
    TempDir tmp;
    std::vector<std::string> failures;

    // 550 small source photos through the augment command, twice
    const auto src = uwgan::testing::synthetic_domain(Domain::lab, 550, 12, 9);
    for (const auto& item : src) {
        save_png(item.image(), tmp / "src" / (item.source_id + ".png"));
    }
    std::vector<fs::path> dirs;
    for (const char* run : {"r1", "r2"}) {
        nlohmann::json doc = {{"seed", 13},
                              {"output", (tmp / run).string()},
                              {"paths", {{"images", (tmp / "src").string()}}},
                              {"augment", {{"target_count", 1980}}}};
        std::ostringstream log;
        dirs.push_back(cmd_augment(parse_pipeline_config(doc), log).run_dir / "images");
    }
    std::size_t png = 0, sidecar = 0, augmented = 0, out_of_range = 0, differ = 0;
    for (const auto& e : fs::directory_iterator(dirs[0])) {
        const auto& p = e.path();
        if (p.extension() == ".png") {
            ++png;
            const ImageTensor img = load_image(p);
            for (float v : img.values()) {
                out_of_range += v < 0.0f || v > 1.0f;
            }
        } else if (p.extension() == ".json") {
            ++sidecar;
            std::ifstream is(p);
            const auto j = nlohmann::json::parse(is);
            if (j.contains("augment")) {
                ++augmented;
                // lineage lives in the augment record; the photo is still a real one
                if (j["provenance"] != "real" || !j["augment"].contains("parent_id") ||
                    j["augment"]["ops"].size() != 1) {
                    ++differ;
                }
            }
        }
        differ += !files_identical(p, dirs[1] / p.filename());
    }
    if (png != 1980 || sidecar != 1980 || augmented != 1980 - 550) {
        failures.push_back("counts " + std::to_string(png) + "/" + std::to_string(sidecar) + "/" +
                           std::to_string(augmented));
    }
    if (differ != 0) {
        failures.push_back(std::to_string(differ) + " files differ across runs or lack provenance");
    }

    // in-memory outputs stay in range too (before 8-bit quantization)
    AugmentConfig ac;
    ac.probability = 1.0;
    const auto mem = expand_dataset(uwgan::testing::synthetic_domain(Domain::lab, 40, 24, 8), 200, ac, 5);
    for (const auto& item : mem) {
        const ImageTensor img = item.image();
        for (double v : img.values()) {
            out_of_range += v < 0.0 || v > 1.0;
        }
    }
    if (out_of_range != 0) {
        failures.push_back(std::to_string(out_of_range) + " values outside [0,1]");
    }

    // salt and pepper on a mid-grey canvas: every hit is visible
    for (auto [h, w] : {std::pair{416, 416}, std::pair{120, 160}, std::pair{37, 53}}) {
        const ImageTensor grey(h, w, 3, 0.5);
        const auto want = static_cast<std::size_t>(std::llround(0.08 * h * w));
        Rng rng(h * 1000 + w);
        std::size_t reported = 0;
        const std::size_t seen = count_not_equal(salt_and_pepper(grey, 0.08, rng, &reported), 0.5);
        DetectionPreprocessConfig dc;
        const auto det = detection_preprocess(grey, dc, 17);
        const std::size_t seen_det = count_not_equal(det.image, 0.5);
        const auto again = detection_preprocess(grey, dc, 17);
        if (seen != want || reported != want || seen_det != want || !(again.image == det.image)) {
            failures.push_back("salt&pepper " + std::to_string(h) + "x" + std::to_string(w) + ": want " +
                               std::to_string(want) + ", got " + std::to_string(seen) + "/" +
                               std::to_string(seen_det));
        }
    }
    std::string detail = "1980 images + sidecars, exact corruption counts, identical reruns";
    if (!failures.empty()) {
        detail.clear();
        for (const auto& f : failures) {
            detail += (detail.empty() ? "" : "; ") + f;
        }
    }
    return {failures.empty(), detail};
}

// Crops every label under images/ + labels/; returns the object count.
std::size_t count_objects(const fs::path& images, const fs::path& labels, std::size_t* n_images)
{
    const auto ds = scan_dataset(images, Domain::lab);
    std::size_t objects = 0;
    for (const auto& item : ds) {
        const fs::path lp = label_path_for(item, labels);
        if (!fs::exists(lp)) {
            continue;
        }
        objects += crop_objects(item.image(), parse_labels(lp)).crops.size();
    }
    *n_images = ds.size();
    return objects;
}

Verdict dataset_tooling()
{
    std::vector<std::string> notes;
    bool ok = true;
    if (const char* dir = std::getenv("UWGAN_FIGSHARE_DIR"); dir != nullptr && *dir != '\0') {
        std::size_t n = 0;
        const std::size_t objects = count_objects(fs::path(dir) / "images", fs::path(dir) / "labels", &n);
        ok &= n == 550 && objects == 4700;
        notes.push_back("figshare " + std::to_string(n) + " images -> " + std::to_string(objects) + " objects");
    } else {
        notes.push_back("figshare count skipped (UWGAN_FIGSHARE_DIR unset)");
    }

    TempDir tmp;
    const auto fx = uwgan::testing::write_labeled_fixture(tmp / "fixture", 10, 99);
    std::size_t n = 0;
    const std::size_t objects = count_objects(fx.images, fx.labels, &n);
    ok &= n == 10 && objects == fx.object_count;
    notes.push_back("fixture " + std::to_string(n) + " images -> " + std::to_string(objects) + " objects");

    const auto labeled = scan_dataset(fx.images, Domain::lab);
    ExportSection e;
    const auto st = export_yolo(labeled, fx.labels, e, 4, tmp / "yolo");
    std::size_t mismatched = 0, flips = 0;
    for (const auto& item : labeled) {
        const auto orig = parse_labels(fx.labels / (item.source_id + ".txt"));
        const std::string stem = flat_id(item.source_id);
        mismatched += parse_labels(tmp / "yolo" / "labels" / (stem + ".txt")) != orig;
    }
    // copies k and k+N share a parent; check every preprocessed label
    for (std::size_t k = 0; k < st.augmented; ++k) {
        const auto& parent = labeled[k % labeled.size()];
        const auto orig = parse_labels(fx.labels / (parent.source_id + ".txt"));
        const auto got =
            parse_labels(tmp / "yolo" / "labels" / (flat_id(parent.source_id) + "~det" + std::to_string(k) + ".txt"));
        const auto mirrored = [&] {
            auto m = orig;
            for (auto& b : m) {
                b.cx = 1.0 - b.cx;
            }
            return m;
        }();
        if (got == mirrored && got != orig) {
            ++flips;
        } else if (got != orig) {
            ++mismatched;
        }
    }
    ok &= mismatched == 0 && flips == st.flipped && flips > 0;
    notes.push_back("export " + std::to_string(st.dataset_size()) + " images, " + std::to_string(flips) +
                    " flipped, " + std::to_string(mismatched) + " label mismatches");
    std::string detail;
    for (const auto& s : notes) {
        detail += (detail.empty() ? "" : "; ") + s;
    }
    return {ok, detail};
}

}  // namespace

int main()
{
    const std::vector<Criterion> criteria{
        {"frechet_closed_forms", "abs 1e-6", frechet_closed_forms},
        {"sqrtm_vs_extended_precision_oracle", "rel 1e-6", sqrtm_against_oracle},
        {"fid_identity_and_noise_monotonicity", "identity < 1e-6", fid_identity_and_monotone},
        {"loss_gradient_finite_differences", "rel 1e-4 at h=1e-5", loss_gradients},
        {"classifier_layer_shapes", "exact; softmax rows 1e-6", classifier_shapes},
        {"toy_cyclegan_convergence", "drop >= 50%, monotone 20-step cycle windows", toy_cyclegan},
        {"classifier_overfit_probe", "train accuracy >= 0.95 within 100 epochs", classifier_probe},
        {"augmentation_contracts", "exact counts and bytes", augmentation_contracts},
        {"dataset_tooling", "exact counts, bit-exact labels", dataset_tooling},
    };
    int failed = 0;
    for (const auto& c : criteria) {
        const auto t0 = std::chrono::steady_clock::now();
        Verdict v;
        try {
            v = c.run();
        } catch (const std::exception& e) {
            v = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        failed += v.pass ? 0 : 1;
        std::cout << (v.pass ? "PASS " : "FAIL ") << c.name << " [" << c.tolerance << "] " << v.detail << " ("
                  << fmt(secs) << " s)" << std::endl;
    }
    std::cout << (criteria.size() - failed) << "/" << criteria.size() << " criteria passed" << std::endl;
    return failed == 0 ? 0 : 1;
}
