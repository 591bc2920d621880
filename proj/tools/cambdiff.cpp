// cambdiff: degrade, restore, fit-curve and eval front end.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "camb/camb.hpp"
#include "camb/degrade.hpp"
#include "camb/error.hpp"
#include "camb/kernels.hpp"
#include "camb/metrics.hpp"
#include "camb/rng.hpp"
#include "camb/solver.hpp"

#ifndef CAMBDIFF_VERSION
#define CAMBDIFF_VERSION "unknown"
#endif

namespace fs = std::filesystem;
using namespace camb;

namespace {

enum Exit { kOk = 0, kIo = 1, kArgs = 2, kNonFinite = 3 };

// Thrown for problems with the paths given on the command line.
struct PathError : IoError {
  using IoError::IoError;
};

void require_readable(const std::string& path) {
  std::error_code ec;
  if (!fs::is_regular_file(path, ec)) throw PathError("cannot read '" + path + "': no such file");
}

void require_writable_target(const std::string& path) {
  const fs::path parent = fs::path(path).parent_path();
  std::error_code ec;
  if (!parent.empty() && !fs::is_directory(parent, ec)) {
    throw PathError("cannot write '" + path + "': directory '" + parent.string() + "' does not exist");
  }
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read '" + path + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << text;
  if (!out) throw IoError("error writing '" + path + "'");
}

std::string sidecar(const std::string& image_path, const std::string& suffix) {
  fs::path p(image_path);
  return (p.parent_path() / (p.stem().string() + suffix)).string();
}

std::string number(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::vector<int> parse_int_list(const std::string& text) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    int v = 0;
    try {
      v = std::stoi(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != item.size() || v < 1) throw ParameterError("invalid depth '" + item + "' in list '" + text + "'");
    out.push_back(v);
  }
  if (out.empty()) throw ParameterError("empty list");
  return out;
}

// ---- degrade ---------------------------------------------------------------

struct DegradeArgs {
  std::string in, out, curve, spec;
  std::optional<double> sigma;
  std::uint64_t seed = 0;
  bool paper_parity = false;
};

int cmd_degrade(const DegradeArgs& a) {
  if (a.curve.empty() == a.spec.empty()) throw ParameterError("give exactly one of --curve or --spec");
  require_readable(a.in);
  require_writable_target(a.out);

  DegradeSpec spec;
  if (!a.spec.empty()) {
    const bool is_file = fs::is_regular_file(a.spec);
    spec = spec_from_json(is_file ? read_text(a.spec) : a.spec);
    if (a.sigma) spec.sigma = *a.sigma;
  } else {
    spec.curve = parse_curve(a.curve);
    const bool hdr = std::holds_alternative<curves::HdrClip>(spec.curve);
    spec.sigma = a.sigma.value_or(hdr ? kHdrPaperSigma : kDefaultSigma);
    spec.seed = a.seed;
  }
  // --paper-parity: sigma is read in [-1,1] units and halved for the [0,1] domain.
  if (a.paper_parity) spec.sigma *= 0.5;
  if (!(spec.sigma >= 0.0)) throw ParameterError("--sigma must be nonnegative");

  const ImageTensor x = load_image(a.in);
  const ImageTensor y = degrade(x, spec);
  save_image(y, a.out);
  write_text(sidecar(a.out, ".spec.json"), spec_to_json(spec) + "\n");
  return kOk;
}

// ---- restore ---------------------------------------------------------------

struct RestoreArgs {
  std::string in, out, trace, op_out, gt;
  SolverConfig config;
  std::optional<double> eta, eta_z, eta_theta;
  std::string prior = "tv";
  std::string lambda_rule = "constant";
  double lambda = 0.3;
  bool paper_parity = false;
};

void write_outputs(const RestoreArgs& a, const RestoreReport& report, const std::string& op_path,
                   bool image) {
  if (image) save_image(clamp_unit(report.restored), a.out);
  write_text(op_path, operator_to_json(report.op) + "\n");
  if (!a.trace.empty()) write_trace_csv(report, a.trace);
}

int cmd_restore(RestoreArgs a) {
  require_readable(a.in);
  if (!a.gt.empty()) require_readable(a.gt);
  require_writable_target(a.out);
  if (!a.trace.empty()) require_writable_target(a.trace);
  const std::string op_path = a.op_out.empty() ? sidecar(a.out, ".op.json") : a.op_out;
  require_writable_target(op_path);

  SolverConfig& config = a.config;
  if (a.eta) config.eta_z = config.eta_theta = *a.eta;
  if (a.eta_z) config.eta_z = *a.eta_z;
  if (a.eta_theta) config.eta_theta = *a.eta_theta;
  config.denoiser = parse_denoiser(a.prior);
  if (a.lambda_rule == "constant") {
    config.lambda = LambdaRule::constant(a.lambda);
  } else if (a.lambda_rule == "snr") {
    config.lambda = LambdaRule::snr_scaled(a.lambda);
  } else {
    throw ParameterError("unknown --lambda-rule '" + a.lambda_rule + "' (expected constant or snr)");
  }
  make_operator(config.op, config.seed);
  config.validate();

  const ImageTensor y = load_image(a.in);
  std::optional<ImageTensor> gt;
  if (!a.gt.empty()) {
    gt = load_image(a.gt);
    require_same_shape(y, *gt, "measurement and ground truth");
  }
  try {
    const RestoreReport report = restore(y, config, gt);
    write_outputs(a, report, op_path, true);
  } catch (const RestoreAborted& e) {
    if (!a.trace.empty()) write_trace_csv(e.partial(), a.trace);
    std::cerr << "cambdiff restore: " << e.what() << "\n";
    return kNonFinite;
  } catch (const NonFiniteLoss& e) {
    std::cerr << "cambdiff restore: " << e.what() << "\n";
    return kNonFinite;
  }
  return kOk;
}

// ---- fit-curve -------------------------------------------------------------

struct FitArgs {
  std::string samples, curve, op = "camb:3:8", out, sweep;
  int steps = 2000;
  int points = 257;
  int seeds = 1;
  double eta = 0.01;
  std::uint64_t seed = 0;
};

std::vector<std::pair<double, double>> read_samples(const std::string& path) {
  std::istringstream in(read_text(path));
  std::vector<std::pair<double, double>> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw FormatError(path + ":" + std::to_string(line_no) + ": expected 'z,f'");
    try {
      std::size_t u1 = 0, u2 = 0;
      const std::string zs = line.substr(0, comma), fs_ = line.substr(comma + 1);
      const double z = std::stod(zs, &u1), f = std::stod(fs_, &u2);
      if (u1 != zs.size() || u2 != fs_.size()) throw std::invalid_argument("trailing");
      out.emplace_back(z, f);
    } catch (const std::invalid_argument&) {
      if (out.empty() && line_no == 1) continue;  // header
      throw FormatError(path + ":" + std::to_string(line_no) + ": cannot parse '" + line + "'");
    } catch (const std::out_of_range&) {
      throw FormatError(path + ":" + std::to_string(line_no) + ": value out of range");
    }
  }
  return out;
}

std::vector<std::pair<double, double>> curve_samples(const Curve& curve, int points, std::uint64_t seed) {
  if (points < 2) throw ParameterError("--points must be >= 2");
  std::vector<std::pair<double, double>> out;
  for (double v : sample_points(points, seed)) out.emplace_back(v, apply_curve(curve, v));
  return out;
}

std::pair<int, int> camb_shape(const std::string& shorthand) {
  const Operator op = make_operator(shorthand);
  const auto* camb = std::get_if<CambOperator>(&op);
  if (!camb) throw ParameterError("fit-curve needs a camb:N:K operator, got '" + shorthand + "'");
  return {camb->degree(), static_cast<int>(camb->depth())};
}

int cmd_fit_curve(const FitArgs& a) {
  if (a.samples.empty() == a.curve.empty()) throw ParameterError("give exactly one of --samples or --curve");
  if (!a.samples.empty()) require_readable(a.samples);
  if (!a.out.empty()) require_writable_target(a.out);
  if (a.seeds < 1) throw ParameterError("--seeds must be >= 1");
  const auto [degree, depth] = camb_shape(a.op);

  std::optional<Curve> curve;
  std::vector<std::pair<double, double>> fixed;
  if (!a.curve.empty()) {
    curve = parse_curve(a.curve);
  } else {
    fixed = validate_samples(read_samples(a.samples));
  }
  auto samples_for = [&](std::uint64_t seed) {
    return curve ? curve_samples(*curve, a.points, seed) : fixed;
  };

  if (!a.sweep.empty()) {
    std::cout << "K,sup_error\n";
    for (int k : parse_int_list(a.sweep)) {
      std::vector<double> errors;
      for (int s = 0; s < a.seeds; ++s) {
        const std::uint64_t seed = a.seed + static_cast<std::uint64_t>(s);
        errors.push_back(fit_curve(samples_for(seed), degree, k, a.steps, a.eta, seed).sup_error);
      }
      std::sort(errors.begin(), errors.end());
      const std::size_t n = errors.size();
      const double median = n % 2 ? errors[n / 2] : 0.5 * (errors[n / 2 - 1] + errors[n / 2]);
      std::cout << k << "," << number(median) << "\n";
    }
    return kOk;
  }

  const CurveFit fit = fit_curve(samples_for(a.seed), degree, depth, a.steps, a.eta, a.seed);
  if (!a.out.empty()) write_text(a.out, operator_to_json(fit.op) + "\n");
  std::cout << "sup_error " << number(fit.sup_error) << "\n";
  return kOk;
}

// ---- eval ------------------------------------------------------------------

struct EvalArgs {
  std::string image, reference, measurement, op;
  std::string dir, ref_dir, measurement_dir;
  int jobs = 1;
  int downsample = 4;
  bool antialias = false;
};

struct EvalItem {
  std::string name, image, reference, measurement;
};

std::string eval_row(const EvalItem& item, const Operator& op, const LoeOptions& loe_options) {
  const ImageTensor x = load_image(item.image);
  const ImageTensor ref = load_image(item.reference);
  require_same_shape(x, ref, ("'" + item.image + "' vs '" + item.reference + "'").c_str());
  const ImageTensor y = item.measurement.empty() ? ref : load_image(item.measurement);
  require_same_shape(y, ref, ("'" + item.measurement + "' vs '" + item.reference + "'").c_str());
  std::ostringstream row;
  row << item.name << "," << number(psnr(x, ref)) << "," << number(ssim(x, ref)) << ","
      << number(loe(x, ref, loe_options)) << "," << number(fidelity_error(y, op, x)) << ","
      << number(fidelity_error(y, op, ref));
  return row.str();
}

std::vector<EvalItem> batch_items(const EvalArgs& a) {
  std::error_code ec;
  if (!fs::is_directory(a.dir, ec)) throw PathError("cannot read directory '" + a.dir + "'");
  if (!fs::is_directory(a.ref_dir, ec)) throw PathError("cannot read directory '" + a.ref_dir + "'");
  std::vector<std::string> names;
  for (const auto& entry : fs::directory_iterator(a.dir)) {
    if (!entry.is_regular_file()) continue;
    const std::string ext = entry.path().extension().string();
    if (ext != ".png" && ext != ".pgm" && ext != ".ppm" && ext != ".pnm") continue;
    names.push_back(entry.path().filename().string());
  }
  std::sort(names.begin(), names.end());
  std::vector<EvalItem> items;
  for (const auto& name : names) {
    EvalItem item{name, (fs::path(a.dir) / name).string(), (fs::path(a.ref_dir) / name).string(), ""};
    require_readable(item.reference);
    if (!a.measurement_dir.empty()) {
      item.measurement = (fs::path(a.measurement_dir) / name).string();
      require_readable(item.measurement);
    }
    items.push_back(std::move(item));
  }
  return items;
}

int cmd_eval(const EvalArgs& a) {
  const bool batch = !a.dir.empty();
  if (batch == !a.image.empty()) throw ParameterError("give either --image/--reference or --dir/--ref-dir");
  if (a.jobs < 1) throw ParameterError("--jobs must be >= 1");
  if (a.downsample < 1) throw ParameterError("--downsample must be >= 1");

  std::vector<EvalItem> items;
  if (batch) {
    if (a.ref_dir.empty()) throw ParameterError("--dir needs --ref-dir");
    items = batch_items(a);
  } else {
    if (a.reference.empty()) throw ParameterError("--image needs --reference");
    require_readable(a.image);
    require_readable(a.reference);
    if (!a.measurement.empty()) require_readable(a.measurement);
    items.push_back({fs::path(a.image).filename().string(), a.image, a.reference, a.measurement});
  }
  if (!a.op.empty()) require_readable(a.op);
  const Operator op = a.op.empty() ? Operator{AffineOperator{}} : operator_from_json(read_text(a.op));
  const LoeOptions loe_options{static_cast<std::size_t>(a.downsample), a.antialias};

  std::vector<std::string> rows(items.size());
  std::vector<std::exception_ptr> errors(items.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < items.size(); i = next++) {
      try {
        rows[i] = eval_row(items[i], op, loe_options);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const int workers = std::min<int>(a.jobs, std::max<int>(1, static_cast<int>(items.size())));
  std::vector<std::thread> pool;
  for (int w = 1; w < workers; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  std::cout << "image,psnr,ssim,loe,fidelity,validation\n";
  for (const auto& row : rows) std::cout << row << "\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Blind inversion of unknown dynamic range compression with cascaded monotonic Bernstein operators"};
  app.set_version_flag("--version", std::string("cambdiff ") + CAMBDIFF_VERSION + " (kernels: " +
                                        std::string(kernels::backend_name(kernels::active().backend)) + ")");
  app.require_subcommand(1);

  DegradeArgs da;
  auto* degrade_cmd = app.add_subcommand("degrade", "Apply a monotone curve and Gaussian noise");
  degrade_cmd->add_option("--in", da.in, "Clean input image")->required();
  degrade_cmd->add_option("--out", da.out, "Degraded output image; <stem>.spec.json is written next to it")->required();
  degrade_cmd->add_option("--curve", da.curve, "gamma:G | hdr_clip | sigmoid:C:S | piecewise:x:y,...");
  degrade_cmd->add_option("--spec", da.spec, "DegradeSpec JSON, inline or a file path");
  degrade_cmd->add_option("--sigma", da.sigma, "Noise standard deviation (default 0.01, hdr_clip 0.05)");
  degrade_cmd->add_option("--seed", da.seed, "Noise seed");
  degrade_cmd->add_flag("--paper-parity", da.paper_parity, "Read sigma in [-1,1] units");

  RestoreArgs ra;
  auto* restore_cmd = app.add_subcommand("restore", "Jointly restore the image and fit the operator");
  restore_cmd->add_option("--in", ra.in, "Measurement image")->required();
  restore_cmd->add_option("--out", ra.out, "Restored image; <stem>.op.json is written next to it")->required();
  restore_cmd->add_option("--trace", ra.trace, "Trace CSV path");
  restore_cmd->add_option("--operator-out", ra.op_out, "Fitted operator JSON path");
  restore_cmd->add_option("--gt", ra.gt, "Ground truth for validation and PSNR traces");
  restore_cmd->add_option("--op", ra.config.op, "camb:N:K | affine | monomlp[:w1,w2]")->capture_default_str();
  restore_cmd->add_flag("--output-affine", ra.config.output_affine, "Add a learned output affine to camb");
  restore_cmd->add_option("--iters", ra.config.outer_iterations, "Outer iterations I")->capture_default_str();
  restore_cmd->add_option("--inner", ra.config.inner_iterations, "Inner Adam steps J")->capture_default_str();
  restore_cmd->add_option("--steps", ra.config.total_steps, "Diffusion steps T")->capture_default_str();
  restore_cmd->add_option("--eta", ra.eta, "Step size for both z and the operator");
  restore_cmd->add_option("--eta-z", ra.eta_z, "Step size for z");
  restore_cmd->add_option("--eta-theta", ra.eta_theta, "Step size for the operator");
  restore_cmd->add_option("--prior", ra.prior, "identity | gaussian | tv")->capture_default_str();
  restore_cmd->add_option("--lambda", ra.lambda, "Coupling weight scale")->capture_default_str();
  restore_cmd->add_option("--lambda-rule", ra.lambda_rule, "constant | snr")->capture_default_str();
  restore_cmd->add_option("--grad-clip", ra.config.grad_clip, "Global norm bound on operator gradients (0 disables)")
      ->capture_default_str();
  restore_cmd->add_flag("--check-monotone", ra.config.check_monotone, "Spot-check operator order after every step");
  restore_cmd->add_option("--seed", ra.config.seed, "Seed for all random streams");
  restore_cmd->add_flag("--paper-parity", ra.paper_parity, "Accepted for symmetry; restore has no unit conversions");

  FitArgs fa;
  auto* fit_cmd = app.add_subcommand("fit-curve", "Fit a CaMB operator to samples of a monotone curve");
  fit_cmd->add_option("--samples", fa.samples, "CSV of z,f pairs");
  fit_cmd->add_option("--curve", fa.curve, "Sample a built-in curve instead (see degrade --curve)");
  fit_cmd->add_option("--points", fa.points, "Sample count for --curve")->capture_default_str();
  fit_cmd->add_option("--op", fa.op, "camb:N:K")->capture_default_str();
  fit_cmd->add_option("--steps", fa.steps, "Adam steps")->capture_default_str();
  fit_cmd->add_option("--eta", fa.eta, "Adam step size")->capture_default_str();
  fit_cmd->add_option("--seed", fa.seed, "Seed for --curve sample positions");
  fit_cmd->add_option("--seeds", fa.seeds, "Seeds per depth in --sweep-k (median reported)")->capture_default_str();
  fit_cmd->add_option("--sweep-k", fa.sweep, "Comma-separated depths; prints K,sup_error CSV");
  fit_cmd->add_option("--out", fa.out, "Fitted operator JSON path");

  EvalArgs ea;
  auto* eval_cmd = app.add_subcommand("eval", "Compute PSNR, SSIM, LOE, fidelity and validation errors");
  eval_cmd->add_option("--image", ea.image, "Restored or enhanced image");
  eval_cmd->add_option("--reference", ea.reference, "Reference image");
  eval_cmd->add_option("--measurement", ea.measurement, "Measurement y (defaults to the reference)");
  eval_cmd->add_option("--operator", ea.op, "Operator JSON for the fidelity columns (defaults to identity)");
  eval_cmd->add_option("--dir", ea.dir, "Batch mode: directory of images");
  eval_cmd->add_option("--ref-dir", ea.ref_dir, "Batch mode: references with matching file names");
  eval_cmd->add_option("--measurement-dir", ea.measurement_dir, "Batch mode: measurements with matching file names");
  eval_cmd->add_option("--jobs", ea.jobs, "Worker threads for batch mode")->capture_default_str();
  eval_cmd->add_option("--downsample", ea.downsample, "LOE downsampling factor")->capture_default_str();
  eval_cmd->add_flag("--loe-antialias", ea.antialias, "Antialiased bicubic downsampling for LOE");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kArgs;
  }

  const std::string name = app.get_subcommands().front()->get_name();
  try {
    if (degrade_cmd->parsed()) return cmd_degrade(da);
    if (restore_cmd->parsed()) return cmd_restore(ra);
    if (fit_cmd->parsed()) return cmd_fit_curve(fa);
    return cmd_eval(ea);
  } catch (const NonFiniteLoss& e) {
    std::cerr << "cambdiff " << name << ": " << e.what() << "\n";
    return kNonFinite;
  } catch (const IoError& e) {
    std::cerr << "cambdiff " << name << ": " << e.what() << "\n";
    return kIo;
  } catch (const FormatError& e) {
    std::cerr << "cambdiff " << name << ": " << e.what() << "\n";
    return kIo;
  } catch (const Error& e) {
    std::cerr << "cambdiff " << name << ": " << e.what() << "\n";
    return kArgs;
  } catch (const std::exception& e) {
    std::cerr << "cambdiff " << name << ": " << e.what() << "\n";
    return kArgs;
  }
}
