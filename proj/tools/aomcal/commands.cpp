#include "commands.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <iomanip>
#include <map>
#include <sstream>

#include "CLI11.hpp"
#include "aomcal/aom_pls.hpp"
#include "aomcal/aom_ridge.hpp"
#include "aomcal/error.hpp"
#include "aomcal/fastaom.hpp"
#include "aomcal/io.hpp"
#include "aomcal/oracle.hpp"
#include "aomcal/stats.hpp"
#include "aomcal/synthetic.hpp"
#include "json.hpp"

namespace aomcal::cli {

namespace {

std::string fmt(double v) {
  std::ostringstream s;
  s << std::setprecision(17) << v;
  return s.str();
}

OperatorBank bank_by_name(const std::string& name, Index p) {
  if (name == "compact") return compact_bank(p);
  if (name == "identity") return identity_bank(p);
  throw ConfigError("unknown bank '" + name + "' (expected compact or identity)");
}

std::string default_bank_name() {
  const char* env = std::getenv("AOMCAL_BANK");
  return env && *env ? env : "compact";
}

struct Dataset {
  CsvTable spectra;
  Matrix y;
};

Dataset load_dataset(const std::string& x_path, const std::string& y_path) {
  Dataset d;
  d.spectra = load_csv(x_path);
  d.y = align_responses(d.spectra, load_csv(y_path));
  return d;
}

std::vector<std::string> output_names(Index q) {
  if (q == 1) return {"y"};
  std::vector<std::string> names;
  for (Index j = 0; j < q; ++j) names.push_back("y" + std::to_string(j + 1));
  return names;
}

void log_selection(std::vector<std::string>& log, const SelectionTable& t) {
  log.push_back("criterion=" + to_string(t.criterion()));
  log.push_back("selection=" + std::to_string(t.cells()) + " cells over " +
                std::to_string(t.folds()) + " folds; best " +
                fmt(t.value(t.chosen_operator(), t.chosen_components())) + " at (" +
                t.operator_names()[t.chosen_operator()] + ", K=" +
                std::to_string(t.chosen_components()) + ")");
}

struct FitOptions {
  std::string method = "aom-pls";
  std::string task = "regression";
  std::string x, y, out, table;
  std::string bank = default_bank_name();
  std::string criterion = "cv_rmse";
  int folds = 5;
  int k_max = 15;
  std::uint64_t seed = 0;
  int threads = 1;
};

AomPlsConfig pls_config(const FitOptions& o, Index p) {
  AomPlsConfig cfg;
  cfg.bank = bank_by_name(o.bank, p);
  cfg.k_max = o.k_max;
  cfg.folds = o.folds;
  cfg.seed = o.seed;
  cfg.criterion = parse_criterion(o.criterion);
  cfg.threads = o.threads;
  return cfg;
}

int cmd_fit(const FitOptions& o, std::ostream& out) {
  const Dataset data = load_dataset(o.x, o.y);
  const Matrix& x = data.spectra.values;
  const Index p = x.cols();
  ModelFile m;
  m.task = o.task;
  m.wavelengths = data.spectra.header;
  std::string table_csv;

  if (o.task == "classification") {
    if (o.method != "aom-pls") throw ConfigError("classification is available for --method aom-pls only");
    const ClassifierFit fit = fit_aom_plsda(x, labels_from(data.y), pls_config(o, p));
    m.method = "aom_pls";
    m.coefficients = fit.pls.coefficients;
    m.x_mean = fit.pls.x_mean;
    m.y_mean = fit.pls.y_mean;
    m.classes = fit.classes;
    m.operator_log = {"operator=" + fit.pls.operator_name,
                      "components=" + std::to_string(fit.pls.n_components)};
    log_selection(m.operator_log, fit.selection);
    table_csv = fit.selection.to_csv();
  } else if (o.task != "regression") {
    throw ConfigError("unknown task '" + o.task + "'");
  } else if (o.method == "aom-pls") {
    const AomPlsFit fit = fit_aom_pls(x, data.y, pls_config(o, p));
    m.method = "aom_pls";
    m.coefficients = fit.pls.coefficients;
    m.x_mean = fit.pls.x_mean;
    m.y_mean = fit.pls.y_mean;
    m.operator_log = {"operator=" + fit.pls.operator_name,
                      "components=" + std::to_string(fit.pls.n_components)};
    log_selection(m.operator_log, fit.selection);
    table_csv = fit.selection.to_csv();
  } else if (o.method == "aom-ridge" || o.method == "mixture-ridge") {
    RidgeConfig cfg;
    cfg.bank = bank_by_name(o.bank, p);
    cfg.folds = o.folds;
    cfg.seed = o.seed;
    cfg.threads = o.threads;
    const RidgeFit fit = o.method == "aom-ridge" ? fit_aom_ridge(x, data.y, cfg)
                                                 : fit_mixture_ridge(x, data.y, cfg);
    m.method = "aom_ridge";
    m.coefficients = fit.beta;
    m.x_mean = fit.x_mean;
    m.y_mean = fit.y_mean;
    m.operator_log = {"operator=" + fit.operator_name, "alpha=" + fmt(fit.alpha)};
    for (std::size_t b = 0; b < fit.scales.size(); ++b)
      m.operator_log.push_back("scale " + cfg.bank.names[b] + "=" + fmt(fit.scales[b]));
    table_csv = fit.table.to_csv();
  } else if (o.method == "fastaom") {
    FastAomConfig cfg;
    cfg.bank = bank_by_name(o.bank, p);
    cfg.folds = o.folds;
    cfg.seed = o.seed;
    cfg.k_max = o.k_max;
    cfg.threads = o.threads;
    const FastAomFit fit = fit_fastaom(x, data.y, cfg);
    m.method = "fastaom";
    m.coefficients = fit.coefficients;
    m.x_mean = fit.x_mean;
    m.y_mean = fit.y_mean;
    for (const auto& s : fit.survivors)
      if (s.weight > 0) m.operator_log.push_back("chain " + s.name + " weight=" + fmt(s.weight));
    m.operator_log.push_back("components=" + std::to_string(fit.pls_stage.n_components));
    m.operator_log.push_back("ridge_alpha=" + fmt(fit.ridge_alpha));
    table_csv = fit.survivor_csv();
  } else {
    throw ConfigError("unknown method '" + o.method + "' (expected aom-pls, aom-ridge, mixture-ridge or fastaom)");
  }

  save_model(m, o.out);
  if (!o.table.empty()) write_file_atomic(o.table, table_csv);
  out << "method " << m.method << "\n";
  for (const auto& line : m.operator_log) out << "  " << line << "\n";
  out << "model written to " << o.out << "\n";
  return 0;
}

int cmd_predict(const std::string& model_path, const std::string& x_path, const std::string& out_path,
                std::ostream& out) {
  const ModelFile m = load_model(model_path);
  const CsvTable x = load_csv(x_path);
  if (x.values.cols() != m.x_mean.size())
    throw DimensionError(x_path + ": " + std::to_string(x.values.cols()) + " channels, model expects " +
                         std::to_string(m.x_mean.size()));
  if (x.header != m.wavelengths) throw DataError(x_path + ": wavelength header differs from the model's");
  std::string csv;
  if (m.task == "classification") {
    const auto cls = m.predict_classes(x.values);
    Matrix c(static_cast<Index>(cls.size()), 1);
    for (std::size_t i = 0; i < cls.size(); ++i) c(static_cast<Index>(i), 0) = cls[i];
    csv = to_csv({"class"}, c, x.ids);
  } else {
    const Matrix pred = m.predict(x.values);
    csv = to_csv(output_names(pred.cols()), pred, x.ids);
  }
  write_file_atomic(out_path, csv);
  out << x.values.rows() << " predictions written to " << out_path << "\n";
  return 0;
}

int cmd_screen(const FitOptions& o, std::ostream& out) {
  const Dataset data = load_dataset(o.x, o.y);
  const SelectionTable t = select_global(data.spectra.values, data.y, pls_config(o, data.spectra.values.cols()));
  write_file_atomic(o.out, t.to_csv());
  out << "chosen " << t.operator_names()[t.chosen_operator()] << " K=" << t.chosen_components() << "\n";
  return 0;
}

int cmd_validate(std::uint64_t seed, int configs, int threads, const std::string& csv_path,
                 std::ostream& out) {
  const EquivalenceReport r = equivalence_suite(seed, configs, threads);
  out << r.text();
  if (!csv_path.empty()) write_file_atomic(csv_path, r.csv());
  return r.passed() ? 0 : static_cast<int>(ErrorClass::numeric);
}

int cmd_split(const std::string& x_path, const std::string& y_path, double fraction, bool classes,
              const std::string& prefix, std::ostream& out) {
  const Dataset data = load_dataset(x_path, y_path);
  const Split s = classes ? stratified_spxy_split(data.spectra.values, labels_from(data.y), fraction)
                          : spxy_split(data.spectra.values, data.y, fraction);
  const auto write = [](const std::string& path, std::vector<Index> rows) {
    std::sort(rows.begin(), rows.end());
    std::string text;
    for (Index r : rows) text += std::to_string(r) + "\n";
    write_file_atomic(path, text);
  };
  write(prefix + "train.txt", s.train);
  write(prefix + "test.txt", s.test);
  out << s.train.size() << " train / " << s.test.size() << " test rows"
      << (s.fallback ? " (index-order fallback)" : "") << "\n";
  return 0;
}

// Benchmark methods produce held-out RMSEP on one split.
double run_method(const std::string& method, const Matrix& xtr, const Matrix& ytr, const Matrix& xte,
                  const Matrix& yte, std::uint64_t seed, int threads) {
  const Index p = xtr.cols();
  if (method == "aom-pls" || method == "pls") {
    AomPlsConfig cfg;
    cfg.bank = method == "pls" ? identity_bank(p) : compact_bank(p);
    cfg.seed = seed;
    cfg.threads = threads;
    return rmsep(predict(fit_aom_pls(xtr, ytr, cfg).pls, xte), yte);
  }
  if (method == "aom-ridge" || method == "ridge" || method == "mixture-ridge") {
    RidgeConfig cfg;
    cfg.bank = method == "ridge" ? identity_bank(p) : compact_bank(p);
    cfg.seed = seed;
    cfg.threads = threads;
    const RidgeFit fit = method == "mixture-ridge" ? fit_mixture_ridge(xtr, ytr, cfg)
                                                   : fit_aom_ridge(xtr, ytr, cfg);
    return rmsep(predict(fit, xte), yte);
  }
  if (method == "fastaom") {
    FastAomConfig cfg;
    cfg.bank = compact_bank(p);
    cfg.seed = seed;
    cfg.threads = threads;
    return rmsep(predict(fit_fastaom(xtr, ytr, cfg), xte), yte);
  }
  throw ConfigError("benchmark: unknown method '" + method + "'");
}

int cmd_benchmark(const std::string& manifest_path, const std::string& out_path,
                  const std::string& results_path, int threads, std::ostream& out) {
  nlohmann::json man;
  try {
    man = nlohmann::json::parse(read_file(manifest_path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(manifest_path + ": " + e.what());
  }
  const std::filesystem::path base = std::filesystem::path(manifest_path).parent_path();
  std::vector<std::pair<std::string, std::string>> comparisons;
  std::vector<std::string> methods;
  double fraction = 0.3;
  std::uint64_t seed = 0;
  std::vector<nlohmann::json> datasets;
  try {
    for (const auto& c : man.at("comparisons"))
      comparisons.emplace_back(c.at(0).get<std::string>(), c.at(1).get<std::string>());
    fraction = man.value("test_fraction", 0.3);
    seed = man.value("seed", std::uint64_t{0});
    for (const auto& d : man.at("datasets")) datasets.push_back(d);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(manifest_path + ": " + e.what());
  }
  if (comparisons.empty() || datasets.empty())
    throw ConfigError(manifest_path + ": need at least one comparison and one dataset");
  for (const auto& [a, b] : comparisons)
    for (const auto& m : {a, b})
      if (std::find(methods.begin(), methods.end(), m) == methods.end()) methods.push_back(m);

  std::map<std::string, std::vector<double>> scores;
  std::ostringstream per_dataset;
  per_dataset << "dataset,method,rmsep\n";
  for (std::size_t i = 0; i < datasets.size(); ++i) {
    const auto& d = datasets[i];
    Matrix x, y;
    std::string name;
    try {
      name = d.value("name", "dataset" + std::to_string(i));
      if (d.contains("synthetic")) {
        SyntheticConfig sc;
        sc.n = d.value("n", sc.n);
        sc.p = d.value("p", sc.p);
        sc.snr = d.value("snr", sc.snr);
        const auto kind = d.at("synthetic").get<std::string>();
        const auto s = d.value("seed", std::uint64_t{i});
        SyntheticData sd;
        if (kind == "planted_derivative") sd = planted_derivative(s, sc);
        else if (kind == "planted_chain") sd = planted_chain(s, sc);
        else throw ConfigError(manifest_path + ": unknown synthetic generator '" + kind + "'");
        x = std::move(sd.x);
        y = std::move(sd.y);
      } else {
        const Dataset ds = load_dataset((base / d.at("x").get<std::string>()).string(),
                                        (base / d.at("y").get<std::string>()).string());
        x = ds.spectra.values;
        y = ds.y;
      }
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(manifest_path + ": dataset " + std::to_string(i) + ": " + e.what());
    }
    const Split split = spxy_split(x, y, fraction);
    const Matrix xtr = take_rows(x, split.train), ytr = take_rows(y, split.train);
    const Matrix xte = take_rows(x, split.test), yte = take_rows(y, split.test);
    for (const auto& m : methods) {
      const double r = run_method(m, xtr, ytr, xte, yte, seed, threads);
      scores[m].push_back(r);
      per_dataset << name << ',' << m << ',' << fmt(r) << '\n';
    }
  }

  std::vector<PairedSummary> family;
  for (const auto& [a, b] : comparisons) {
    PairedSummary s = paired_summary(scores[a], scores[b], 10000, seed);
    s.label = a + " vs " + b;
    family.push_back(s);
  }
  apply_holm(family);
  const std::string table = summary_table_csv(family);
  write_file_atomic(out_path, table);
  if (!results_path.empty()) write_file_atomic(results_path, per_dataset.str());
  out << table;
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Operator-adaptive spectral calibration", "aomcal"};
  app.require_subcommand(1);
  int threads = 1;
  app.add_option("--threads", threads, "Worker cap")->check(CLI::PositiveNumber);

  FitOptions fo;
  auto add_common = [&](CLI::App* c, bool with_out) {
    c->add_option("--x", fo.x, "Spectra CSV")->required();
    c->add_option("--y", fo.y, "Response CSV")->required();
    c->add_option("--bank", fo.bank, "Operator bank: compact or identity (default from AOMCAL_BANK)");
    c->add_option("--folds", fo.folds, "Inner CV folds")->check(CLI::Range(2, 1000));
    c->add_option("--seed", fo.seed, "Fold seed");
    c->add_option("--k-max", fo.k_max, "Largest component count")->check(CLI::Range(1, 1000));
    c->add_option("--criterion", fo.criterion, "cv_rmse, press or covariance");
    c->add_option("--threads", threads, "Worker cap")->check(CLI::PositiveNumber);
    if (with_out) c->add_option("--out", fo.out, "Output path")->required();
  };

  auto* fit = app.add_subcommand("fit", "Fit a calibration and write a model file");
  add_common(fit, true);
  fit->add_option("--method", fo.method, "aom-pls, aom-ridge, mixture-ridge or fastaom");
  fit->add_option("--task", fo.task, "regression or classification");
  fit->add_option("--table", fo.table, "Also write the selection table CSV");

  std::string model_path, pred_x, pred_out;
  auto* pred = app.add_subcommand("predict", "Predict with a saved model");
  pred->add_option("--model", model_path, "Model JSON")->required();
  pred->add_option("--x", pred_x, "Spectra CSV")->required();
  pred->add_option("--out", pred_out, "Prediction CSV")->required();

  auto* screen = app.add_subcommand("screen", "Write the operator selection table without refitting");
  add_common(screen, true);

  std::uint64_t vseed = 2024;
  int configs = 20;
  std::string vcsv;
  auto* validate = app.add_subcommand("validate", "Run the folded-versus-materialised equivalence suite");
  validate->add_option("--seed", vseed, "Configuration seed");
  validate->add_option("--configs", configs, "Random configurations")->check(CLI::Range(1, 10000));
  validate->add_option("--csv", vcsv, "Also write the per-check CSV");
  validate->add_option("--threads", threads, "Worker cap")->check(CLI::PositiveNumber);

  std::string manifest, bench_out, bench_results;
  auto* bench = app.add_subcommand("benchmark", "Paired benchmark over a dataset manifest");
  bench->add_option("--manifest", manifest, "Manifest JSON")->required();
  bench->add_option("--out", bench_out, "Summary table CSV")->required();
  bench->add_option("--results", bench_results, "Per-dataset RMSEP CSV");
  bench->add_option("--threads", threads, "Worker cap")->check(CLI::PositiveNumber);

  std::string sx, sy, sprefix;
  double fraction = 0.3;
  bool spxy = false, classes = false;
  auto* split = app.add_subcommand("split", "Deterministic calibration/test split");
  split->add_option("--x", sx, "Spectra CSV")->required();
  split->add_option("--y", sy, "Response CSV")->required();
  split->add_flag("--spxy", spxy, "Use SPXY (the only method)")->required();
  split->add_flag("--classes", classes, "Treat y as class ids and stratify");
  split->add_option("--test-fraction", fraction, "Test share")->check(CLI::Range(0.0, 1.0));
  split->add_option("--out", sprefix, "Output prefix; writes <prefix>train.txt and <prefix>test.txt")
      ->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "aomcal: " << e.what() << "\n";
    return static_cast<int>(ErrorClass::config);
  }

  try {
    fo.threads = threads;
    if (*fit) return cmd_fit(fo, out);
    if (*pred) return cmd_predict(model_path, pred_x, pred_out, out);
    if (*screen) return cmd_screen(fo, out);
    if (*validate) return cmd_validate(vseed, configs, threads, vcsv, out);
    if (*bench) return cmd_benchmark(manifest, bench_out, bench_results, threads, out);
    if (*split) return cmd_split(sx, sy, fraction, classes, sprefix, out);
  } catch (const Error& e) {
    err << "aomcal: " << e.what() << "\n";
    return e.exit_code();
  }
  return static_cast<int>(ErrorClass::config);
}

}  // namespace aomcal::cli
