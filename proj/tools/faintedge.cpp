#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "faintedge/faintedge.hpp"

using namespace faintedge;
using json = nlohmann::ordered_json;

namespace {

struct DetectOptions {
    std::string input;
    std::string json_out = "-";
    std::string map_out;
    bool no_nms = false;
    bool estimate_sigma = false;
    bool no_cct = false;
};

void add_detector_flags(CLI::App* cmd, DetectorParams& p, DetectOptions& o) {
    cmd->add_option("input", o.input, "Input image (.pgm or .png)")->required()->check(CLI::ExistingFile);
    cmd->add_option("--w", p.w, "Filter width (even)")->capture_default_str();
    cmd->add_option("--sigma", p.sigma, "Noise standard deviation")->capture_default_str();
    cmd->add_flag("--estimate-sigma", o.estimate_sigma, "Estimate sigma from the image (MAD of differences)");
    cmd->add_option("--delta", p.delta, "False-alarm budget")->capture_default_str();
    cmd->add_option("--overlap", p.suppression.overlap_fraction, "Suppression overlap fraction")->capture_default_str();
    cmd->add_flag("--no-cct", o.no_cct, "Skip the consistent-contrast test");
    cmd->add_flag("--no-nms", o.no_nms, "Report detections before suppression");
    cmd->add_option("-o,--json", o.json_out, "JSON output path, - for stdout")->capture_default_str();
    cmd->add_option("--map", o.map_out, "Rasterised edge map output (.pgm or .png)");
}

GrayImage load_for_detection(const DetectOptions& o, DetectorParams& p) {
    GrayImage img = load_image(o.input);
    if (o.estimate_sigma) p.sigma = estimate_sigma_mad(img);
    p.consistent_contrast = !o.no_cct;
    p.validate();
    return img;
}

void write_text(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ParameterError("cannot write " + path);
    out << text;
}

void write_map(const std::string& path, const EdgeSet& edges) {
    if (path.empty()) return;
    save_image(path, edge_map_image(rasterize(edges)), format_from_extension(path), {8, true});
}

json line_records(const EdgeSet& edges) {
    json arr = json::array();
    for (const Edge& e : edges.edges) {
        const Point a = e.polyline.front(), b = e.polyline.back();
        json r;
        r["x0"] = a.x;
        r["y0"] = a.y;
        r["x1"] = b.x;
        r["y1"] = b.y;
        r["L"] = e.length;
        r["R"] = e.response;
        r["level"] = e.level;
        r["partial"] = e.partial;
        arr.push_back(r);
    }
    return arr;
}

json curve_records(const EdgeSet& edges) {
    json arr = json::array();
    for (const Edge& e : edges.edges) {
        json pts = json::array();
        for (const Point& p : e.polyline) pts.push_back({p.x, p.y});
        json r;
        r["L"] = e.length;
        r["R"] = e.response;
        r["level"] = e.level;
        r["polyline"] = pts;
        arr.push_back(r);
    }
    return arr;
}

std::string csv_number(double v) {
    std::ostringstream s;
    s.precision(10);
    s << v;
    return s.str();
}

std::vector<int> default_lengths(int side) {
    std::vector<int> out;
    for (int L = 2; L < side; L *= 2) out.push_back(L);
    return out;
}

std::vector<double> snr_grid(double from, double to, double step) {
    if (!(step > 0.0)) throw ParameterError("SNR step must be positive");
    std::vector<double> out;
    const int n = static_cast<int>(std::floor((to - from) / step + 1e-9));
    for (int i = 0; i <= n; ++i) out.push_back(from + i * step);
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Faint edge detection in noisy grayscale images"};
    app.require_subcommand(1);

    // detect-lines
    DetectorParams line_p;
    DetectOptions line_o;
    auto* lines = app.add_subcommand("detect-lines", "Straight line segments");
    add_detector_flags(lines, line_p, line_o);
    lines->add_option("--s", line_p.s, "Gap between the filter halves")->capture_default_str();
    lines->add_option("--max-length", line_p.max_length, "Longest level to build, 0 for no limit")->capture_default_str();
    lines->add_option("--cct-depth", line_p.cct_depth, "Sub-segment depth of the consistency test")->capture_default_str();

    // detect-curves
    DetectorParams curve_p;
    DetectOptions curve_o;
    std::string mode = "stringent";
    auto* curves = app.add_subcommand("detect-curves", "Beam curves");
    add_detector_flags(curves, curve_p, curve_o);
    curves->add_option("--mode", mode, "stringent or greedy")
        ->check(CLI::IsMember({"stringent", "greedy"}))
        ->capture_default_str();
    curves->add_option("--k", curve_p.k, "Interface points scanned in greedy mode")->capture_default_str();
    curves->add_option("--beta", curve_p.beta, "Search-space growth constant")->capture_default_str();

    // enhance-fibers
    DetectorParams fiber_p;
    DetectOptions fiber_o;
    DiffusionParams diff;
    std::string orientation = "vertical";
    std::string enhanced_out;
    double length_threshold = 0.25;
    auto* fibers = app.add_subcommand("enhance-fibers", "Pair opposite-sign edges into fiber ridges");
    fibers->add_option("input", fiber_o.input, "Input image (.pgm or .png)")->required()->check(CLI::ExistingFile);
    fibers->add_option("--w", fiber_p.w, "Filter width (even)")->capture_default_str();
    fibers->add_option("--sigma", fiber_p.sigma, "Noise standard deviation")->capture_default_str();
    fibers->add_flag("--estimate-sigma", fiber_o.estimate_sigma, "Estimate sigma from the image");
    fibers->add_option("--delta", fiber_p.delta, "False-alarm budget")->capture_default_str();
    fibers->add_option("--varx", diff.var_x, "Diffusion variance across the fibers")->capture_default_str();
    fibers->add_option("--vary", diff.var_y, "Diffusion variance along the fibers")->capture_default_str();
    fibers->add_option("--orientation", orientation, "vertical or horizontal")
        ->check(CLI::IsMember({"vertical", "horizontal"}))
        ->capture_default_str();
    fibers->add_option("--length-threshold", length_threshold,
                       "Ridge threshold for the length report, as a fraction of the maximum enhanced value")
        ->check(CLI::Range(0.0, 1.0))
        ->capture_default_str();
    fibers->add_option("-o,--output", enhanced_out, "Enhanced image output (.pgm or .png)")->required();
    fibers->add_option("--map", fiber_o.map_out, "Rasterised edge map output");

    // simulate
    PatternSpec sim;
    double sim_sigma = 1.0, sim_snr = 2.0;
    std::uint64_t sim_seed = 0;
    std::string sim_out, truth_out;
    int sim_depth = 16;
    auto* simulate = app.add_subcommand("simulate", "Synthetic benchmark pattern plus Gaussian noise");
    simulate->add_option("--side", sim.side, "Image side")->capture_default_str();
    simulate->add_option("--snr", sim_snr, "Contrast divided by sigma")->capture_default_str();
    simulate->add_option("--sigma", sim_sigma, "Noise standard deviation")->capture_default_str();
    simulate->add_option("--seed", sim_seed, "Noise seed")->capture_default_str();
    simulate->add_option("--bit-depth", sim_depth, "Output bit depth (8 or 16), display-normalised")
        ->check(CLI::IsMember({8, 16}))
        ->capture_default_str();
    simulate->add_option("-o,--output", sim_out, "Noisy image output (.pgm or .png)")->required();
    simulate->add_option("--truth", truth_out, "Ground-truth edge map output");

    // validate-threshold
    std::string family = "lines";
    int vt_side = 129, vt_trials = 20;
    std::uint64_t vt_seed = 0;
    std::vector<int> vt_lengths;
    ThresholdParams vt_p;
    std::string vt_out = "-";
    auto* validate = app.add_subcommand("validate-threshold", "Empirical noise maxima against the analytic threshold");
    validate->add_option("--family", family, "lines or curves")
        ->check(CLI::IsMember({"lines", "curves"}))
        ->capture_default_str();
    validate->add_option("--side", vt_side, "Noise image side")->capture_default_str();
    validate->add_option("--trials", vt_trials, "Pure-noise trials (>= 3)")->capture_default_str();
    validate->add_option("--lengths", vt_lengths, "Lengths to report (default powers of two below the side)");
    validate->add_option("--w", vt_p.w, "Filter width")->capture_default_str();
    validate->add_option("--sigma", vt_p.sigma, "Noise standard deviation")->capture_default_str();
    validate->add_option("--delta", vt_p.delta, "False-alarm budget")->capture_default_str();
    validate->add_option("--beta", vt_p.beta, "Beam-curve search-space growth")->capture_default_str();
    validate->add_option("--seed", vt_seed, "Seed of the first trial")->capture_default_str();
    validate->add_option("-o,--output", vt_out, "CSV output, - for stdout")->capture_default_str();

    // sweep
    RunConfig sw;
    std::string sw_detector = "curves-stringent";
    double snr_from = 0.0, snr_to = 2.0, snr_step = 0.2;
    int sw_trials = 20, calib_trials = 0;
    std::uint64_t calib_seed = 1000000;
    bool sw_no_nms = false;
    std::string sw_out = "-";
    auto* sweep = app.add_subcommand("sweep", "F-measure against SNR on the synthetic pattern");
    sweep->add_option("--detector", sw_detector, "lines, curves-stringent or curves-greedy")->capture_default_str();
    sweep->add_option("--side", sw.side, "Pattern side")->capture_default_str();
    sweep->add_option("--snr-from", snr_from)->capture_default_str();
    sweep->add_option("--snr-to", snr_to)->capture_default_str();
    sweep->add_option("--snr-step", snr_step)->capture_default_str();
    sweep->add_option("--trials", sw_trials, "Trials per SNR")->capture_default_str();
    sweep->add_option("--seed", sw.seed, "Seed of the first trial")->capture_default_str();
    sweep->add_option("--match-tol", sw.match_tol, "Matching distance in pixels")->capture_default_str();
    sweep->add_option("--beta", sw.params.beta, "Beam-curve search-space growth")->capture_default_str();
    sweep->add_option("--k", sw.params.k, "Greedy interface points")->capture_default_str();
    sweep->add_option("--calibrate-beta", calib_trials,
                      "Raise beta until this many pure-noise images give no curve, 0 to skip")
        ->capture_default_str();
    sweep->add_option("--calibration-seed", calib_seed)->capture_default_str();
    sweep->add_flag("--no-nms", sw_no_nms, "Skip suppression");
    sweep->add_option("-o,--output", sw_out, "CSV output, - for stdout")->capture_default_str();

    // audit
    RunConfig au;
    std::string au_detector = "lines";
    std::vector<int> au_sides{33, 65, 129};
    bool timing = false, counts = false;
    std::string au_out = "-";
    auto* audit = app.add_subcommand("audit", "Operation counts against image size");
    audit->add_option("--detector", au_detector, "lines, curves-stringent or curves-greedy")->capture_default_str();
    audit->add_option("--sides", au_sides, "Square image sides")->capture_default_str();
    audit->add_option("--k", au.params.k, "Greedy interface points")->capture_default_str();
    audit->add_option("--seed", au.seed, "Noise seed")->capture_default_str();
    audit->add_flag("--timing", timing, "Add wall-clock seconds (not reproducible)");
    audit->add_flag("--counts", counts, "Per-level candidate counts of the largest side instead of ops");
    audit->add_option("-o,--output", au_out, "CSV output, - for stdout")->capture_default_str();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*lines) {
            const GrayImage img = load_for_detection(line_o, line_p);
            const LinePyramid pyr(img, line_p, line_p.consistent_contrast);
            EdgeSet edges = detect_lines(pyr, line_p);
            if (!line_o.no_nms) edges = line_nms(edges, line_p);
            write_text(line_o.json_out, line_records(edges).dump(2) + "\n");
            write_map(line_o.map_out, edges);
        } else if (*curves) {
            const GrayImage img = load_for_detection(curve_o, curve_p);
            const BeamTree tree(img, curve_p, mode == "greedy" ? BeamMode::greedy : BeamMode::stringent);
            const EdgeSet edges = curve_o.no_nms ? detect_curves(tree, curve_p) : detect_curves_nms(tree, curve_p);
            write_text(curve_o.json_out, curve_records(edges).dump(2) + "\n");
            write_map(curve_o.map_out, edges);
        } else if (*fibers) {
            const GrayImage img = load_image(fiber_o.input);
            if (fiber_o.estimate_sigma) fiber_p.sigma = estimate_sigma_mad(img);
            diff.orientation = parse_fiber_orientation(orientation);
            const FiberResult res = enhance_image_fibers(img, fiber_p, diff);
            save_image(enhanced_out, normalized_for_display(res.enhanced, 16), format_from_extension(enhanced_out));
            write_map(fiber_o.map_out, res.edges);
            const double peak = *std::max_element(res.enhanced.pixels().begin(), res.enhanced.pixels().end());
            const double length = peak > 0.0 ? total_fiber_length(res.enhanced, length_threshold * peak) : 0.0;
            std::cout << "total_fiber_length," << csv_number(length) << "\n";
        } else if (*simulate) {
            sim.contrast = sim_snr * sim_sigma;
            const TestPattern pat = generate_test_pattern(sim);
            const GrayImage noisy = add_gaussian_noise(pat.image, {sim_sigma, sim_seed});
            const ImageFormat fmt = format_from_extension(sim_out);
            if (fmt == ImageFormat::pgm && sim_depth == 16) {
                // PGM keeps the raw intensities shifted to nonnegative values so sigma stays meaningful.
                GrayImage shifted = noisy;
                const double lo = *std::min_element(noisy.pixels().begin(), noisy.pixels().end());
                const double scale = 1000.0;
                for (double& v : shifted.pixels()) v = (v - lo) * scale;
                save_image(sim_out, shifted, fmt, {16, true});
                std::cerr << "intensity scale " << scale << " (sigma " << sim_sigma * scale << " in file units)\n";
            } else {
                save_image(sim_out, normalized_for_display(noisy, sim_depth), fmt, {sim_depth, true});
            }
            if (!truth_out.empty())
                save_image(truth_out, edge_map_image(pat.truth), format_from_extension(truth_out), {8, true});
        } else if (*validate) {
            const ResponseFamily fam = family == "lines" ? ResponseFamily::straight_lines : ResponseFamily::beam_curves;
            if (vt_lengths.empty()) vt_lengths = default_lengths(vt_side);
            const auto rows = empirical_max_response(fam, vt_side, vt_lengths, vt_trials, {vt_p.sigma, vt_seed}, vt_p);
            std::string csv = "L,theoretical_T,empirical_median,family\n";
            for (const EmpiricalRow& r : rows) {
                csv += csv_number(r.length) + "," + csv_number(r.theoretical) + "," +
                       (r.trials_with_data > 0 ? csv_number(r.empirical_median) : std::string("")) + "," +
                       to_string(fam) + "\n";
            }
            write_text(vt_out, csv);
        } else if (*sweep) {
            sw.detector = parse_detector(sw_detector);
            sw.nms = !sw_no_nms;
            if (calib_trials > 0) {
                const BetaCalibration cal = calibrate_beta(sw, calib_trials, calib_seed);
                sw.params.beta = cal.beta;
                std::cerr << "calibrated beta " << cal.beta << "\n";
            }
            const auto rows = snr_sweep(sw, snr_grid(snr_from, snr_to, snr_step), sw_trials);
            std::string csv = "detector,snr,beta,precision,recall,f_measure,f_sd,mean_count,median_count\n";
            for (const SweepRow& r : rows) {
                csv += to_string(sw.detector) + "," + csv_number(r.snr) + "," + csv_number(sw.params.beta) + "," +
                       csv_number(r.mean.precision) + "," + csv_number(r.mean.recall) + "," +
                       csv_number(r.mean.f_measure) + "," + csv_number(r.f_sd) + "," + csv_number(r.mean_count) +
                       "," + csv_number(r.median_count) + "\n";
            }
            write_text(sw_out, csv);
        } else if (*audit) {
            const Detector det = parse_detector(au_detector);
            std::string csv;
            if (counts) {
                const int side = *std::max_element(au_sides.begin(), au_sides.end());
                const GrayImage img = gaussian_noise_image(side, side, {au.params.sigma, au.seed});
                if (det == Detector::lines) {
                    const LinePyramid pyr(img, au.params, false);
                    csv = "length,slots,valid,slots_per_pixel\n";
                    for (const LineLevelCount& c : pyr.count_audit())
                        csv += std::to_string(c.length) + "," + std::to_string(c.slots) + "," +
                               std::to_string(c.valid) + "," +
                               csv_number(static_cast<double>(c.slots) / (static_cast<double>(side) * side)) + "\n";
                } else {
                    const BeamTree tree(img, au.params,
                                        det == Detector::curves_greedy ? BeamMode::greedy : BeamMode::stringent);
                    const double n = static_cast<double>(tree.side()) * tree.side();
                    csv = "level,tiles,stored,distinct,created,stored_per_pixel\n";
                    for (const BeamLevelCount& c : curve_count_audit(tree))
                        csv += std::to_string(c.level) + "," + std::to_string(c.tiles) + "," +
                               std::to_string(c.stored) + "," + std::to_string(c.distinct) + "," +
                               std::to_string(c.created) + "," + csv_number(static_cast<double>(c.stored) / n) + "\n";
                }
            } else {
                const AuditResult r = runtime_audit(det, au_sides, au, timing);
                csv = timing ? "side,pixels,ops,normalized,seconds\n" : "side,pixels,ops,normalized\n";
                for (const AuditRow& row : r.rows) {
                    csv += std::to_string(row.side) + "," + csv_number(row.pixels) + "," + std::to_string(row.ops) +
                           "," + csv_number(row.normalized);
                    if (timing) csv += "," + csv_number(*row.seconds);
                    csv += "\n";
                }
                std::cerr << "log-log slope " << r.slope << "\n";
            }
            write_text(au_out, csv);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
