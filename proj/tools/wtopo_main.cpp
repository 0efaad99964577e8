// wtopo — width-aware topological energies for image segmentation.
//
// Subcommands:
//   ph        persistence diagram of an image (CSV, optional Betti counts)
//   minimize  direct AdamW minimization of the PH or WT energy on an image
//   segment   Topo-NLSTD variational segmentation
//   metrics   volumetric + Betti metrics between two binarized images
//
// Exit codes: 0 success, 1 I/O error, 2 config error, 3 invariant violation.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "wtopo/config.hpp"
#include "wtopo/image_io.hpp"
#include "wtopo/minimize.hpp"
#include "wtopo/nlstd.hpp"
#include "wtopo/persistence.hpp"
#include "wtopo/topo_energy.hpp"

namespace fs = std::filesystem;

namespace {

std::vector<double> parse_double_list(const std::string& csv, const std::string& flag) {
    std::vector<double> out;
    std::istringstream in(csv);
    std::string item;
    while (std::getline(in, item, ',')) {
        try {
            out.push_back(std::stod(item));
        } catch (const std::exception&) {
            throw wtopo::config_error("bad number in " + flag + ": '" + item + "'");
        }
    }
    if (out.empty()) throw wtopo::config_error(flag + " needs at least one value");
    return out;
}

std::vector<std::string> split_list(const std::string& csv) {
    std::vector<std::string> out;
    std::istringstream in(csv);
    std::string item;
    while (std::getline(in, item, ',')) out.push_back(item);
    return out;
}

int run_ph(const std::string& image_path, const std::string& out_csv,
           std::optional<double> threshold) {
    const wtopo::ScalarField field = wtopo::load_field(image_path);
    const wtopo::PersistenceDiagram diagram = wtopo::compute_superlevel_persistence(field);
    wtopo::write_diagram_csv(diagram, out_csv);
    if (threshold) {
        std::printf("beta0 %d\n", wtopo::betti_at_threshold(diagram, *threshold, 0));
        std::printf("beta1 %d\n", wtopo::betti_at_threshold(diagram, *threshold, 1));
    }
    return 0;
}

int run_minimize(const std::string& image_path, const std::string& config_path,
                 const std::string& out_image, const std::string& variant_name, int iters,
                 int snapshot_every, const std::string& trace_path) {
    const wtopo::ScalarField field = wtopo::load_field(image_path);
    const wtopo::MinimizeConfig cfg = wtopo::load_minimize_config(config_path);
    wtopo::EnergyVariant variant;
    if (variant_name == "wt")
        variant = wtopo::EnergyVariant::wt;
    else if (variant_name == "ph")
        variant = wtopo::EnergyVariant::ph;
    else
        throw wtopo::config_error("--variant must be 'wt' or 'ph'");

    std::function<void(int, const wtopo::ScalarField&)> snapshot;
    if (snapshot_every > 0) {
        const fs::path base(out_image);
        const fs::path dir = base.parent_path();
        const std::string stem = base.stem().string();
        snapshot = [=](int iter, const wtopo::ScalarField& f) {
            if ((iter + 1) % snapshot_every != 0) return;
            char name[64];
            std::snprintf(name, sizeof name, "%s_iter%05d.png", stem.c_str(), iter + 1);
            wtopo::save_field(f, (dir / name).string(), wtopo::FieldFormat::png);
        };
    }

    const wtopo::MinimizeResult result =
        wtopo::minimize_energy(field, cfg.topo, cfg.adamw, iters, variant, snapshot);
    wtopo::save_field(result.field, out_image);
    if (!trace_path.empty()) {
        std::ofstream out(trace_path);
        if (!out) throw wtopo::io_error("cannot write " + trace_path);
        out << "iter,energy\n";
        for (size_t i = 0; i < result.energy_trace.size(); ++i) {
            char buf[64];
            std::snprintf(buf, sizeof buf, "%zu,%.17g", i, result.energy_trace[i]);
            out << buf << "\n";
        }
    }
    return 0;
}

int run_segment(const std::string& image_path, const std::string& config_path,
                const std::string& out_dir, const std::string& features_csv,
                const std::string& means_csv, double sigma, bool dump_raw) {
    const wtopo::ScalarField image = wtopo::load_field(image_path);
    wtopo::SolverConfig cfg = wtopo::load_solver_config(config_path);

    std::vector<wtopo::ScalarField> features;
    if (!features_csv.empty()) {
        for (const std::string& path : split_list(features_csv))
            features.push_back(wtopo::load_field(path));
    } else if (!means_csv.empty()) {
        // Built-in unary features o_l(x) = -(I(x) - c_l)^2 / sigma^2.
        const std::vector<double> means = parse_double_list(means_csv, "--means");
        if (sigma <= 0.0) throw wtopo::config_error("--sigma must be > 0");
        for (double c : means) {
            wtopo::ScalarField o(image.width, image.height);
            for (int i = 0; i < image.size(); ++i) {
                const double d = image[i] - c;
                o[i] = -(d * d) / (sigma * sigma);
            }
            features.push_back(std::move(o));
        }
    } else {
        throw wtopo::config_error("segment needs --features or --means");
    }
    if (features.size() < 2)
        throw wtopo::config_error("segment needs at least two feature channels");

    const wtopo::SolveResult result = wtopo::run_topo_nlstd(features, image, cfg);
    if (!result.u.satisfies_simplex(1e-9))
        throw wtopo::invariant_error("segment: emitted iterate violates the simplex constraint");

    fs::create_directories(out_dir);
    for (int l = 0; l < result.u.num_classes(); ++l) {
        char name[32];
        std::snprintf(name, sizeof name, "u_%d.png", l);
        wtopo::save_field(result.u.channels[static_cast<size_t>(l)],
                          (fs::path(out_dir) / name).string(), wtopo::FieldFormat::png);
        if (dump_raw) {
            std::snprintf(name, sizeof name, "u_%d.twsf", l);
            wtopo::save_field(result.u.channels[static_cast<size_t>(l)],
                              (fs::path(out_dir) / name).string(), wtopo::FieldFormat::raw_f32);
        }
    }
    std::ofstream log_out((fs::path(out_dir) / "iterates.csv").string());
    if (!log_out) throw wtopo::io_error("cannot write iterate log");
    wtopo::write_iterate_log_csv(result.log, log_out);
    std::printf("iterations %zu\n", result.log.size());
    return 0;
}

int run_metrics(const std::string& pred_path, const std::string& truth_path,
                std::optional<int> beta0, std::optional<int> beta1) {
    const wtopo::ScalarField pred = wtopo::load_field(pred_path);
    const wtopo::ScalarField truth = wtopo::load_field(truth_path);
    const wtopo::MetricsReport report = wtopo::compute_metrics(pred, truth, beta0, beta1);
    nlohmann::json j{{"accuracy", report.accuracy},
                     {"dice", report.dice},
                     {"iou", report.iou},
                     {"betti_error_0", report.betti_error_0},
                     {"betti_error_1", report.betti_error_1}};
    std::cout << j.dump(2) << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"width-aware topological energies for image segmentation"};
    app.require_subcommand(1);

    // ph
    auto* ph = app.add_subcommand("ph", "persistence diagram of an image");
    std::string ph_image, ph_csv;
    double ph_threshold = -1.0;
    bool ph_has_threshold = false;
    ph->add_option("image", ph_image)->required();
    ph->add_option("out_csv", ph_csv)->required();
    auto* thr = ph->add_option("--threshold", ph_threshold, "print Betti counts at t");
    thr->each([&](const std::string&) { ph_has_threshold = true; });

    // minimize
    auto* mini = app.add_subcommand("minimize", "direct energy minimization");
    std::string mini_image, mini_config, mini_out, mini_variant = "wt", mini_trace;
    int mini_iters = 400, mini_snapshot = 0;
    mini->add_option("image", mini_image)->required();
    mini->add_option("config", mini_config)->required();
    mini->add_option("out_image", mini_out)->required();
    mini->add_option("--variant", mini_variant, "wt or ph");
    mini->add_option("--iters", mini_iters, "iteration count");
    mini->add_option("--snapshot-every", mini_snapshot, "write a PNG every N iterations");
    mini->add_option("--trace", mini_trace, "energy trace CSV path");

    // segment
    auto* seg = app.add_subcommand("segment", "Topo-NLSTD segmentation");
    std::string seg_image, seg_config, seg_out, seg_features, seg_means;
    double seg_sigma = 0.2;
    bool seg_dump_raw = false;
    seg->add_option("image", seg_image)->required();
    seg->add_option("config", seg_config)->required();
    seg->add_option("out_dir", seg_out)->required();
    seg->add_option("--features", seg_features, "comma-separated feature field files");
    seg->add_option("--means", seg_means, "comma-separated class means for built-in features");
    seg->add_option("--sigma", seg_sigma, "bandwidth of the built-in unary features");
    seg->add_flag("--dump-raw", seg_dump_raw, "also write raw-f32 channels");

    // metrics
    auto* met = app.add_subcommand("metrics", "metric report as JSON");
    std::string met_pred, met_truth;
    int met_beta0 = -1, met_beta1 = -1;
    bool has_beta0 = false, has_beta1 = false;
    met->add_option("pred", met_pred)->required();
    met->add_option("truth", met_truth)->required();
    met->add_option("--beta0", met_beta0)->each([&](const std::string&) { has_beta0 = true; });
    met->add_option("--beta1", met_beta1)->each([&](const std::string&) { has_beta1 = true; });

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (app.got_subcommand(ph))
            return run_ph(ph_image, ph_csv,
                          ph_has_threshold ? std::optional<double>(ph_threshold) : std::nullopt);
        if (app.got_subcommand(mini))
            return run_minimize(mini_image, mini_config, mini_out, mini_variant, mini_iters,
                                mini_snapshot, mini_trace);
        if (app.got_subcommand(seg))
            return run_segment(seg_image, seg_config, seg_out, seg_features, seg_means, seg_sigma,
                               seg_dump_raw);
        if (app.got_subcommand(met))
            return run_metrics(met_pred, met_truth,
                               has_beta0 ? std::optional<int>(met_beta0) : std::nullopt,
                               has_beta1 ? std::optional<int>(met_beta1) : std::nullopt);
    } catch (const wtopo::io_error& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return 1;
    } catch (const wtopo::config_error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const wtopo::invariant_error& e) {
        std::cerr << "invariant violation: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
