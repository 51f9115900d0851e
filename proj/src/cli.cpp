#include "ofds/cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <tuple>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "ofds/atomic_file.hpp"
#include "ofds/baselines.hpp"
#include "ofds/calibration.hpp"
#include "ofds/engine.hpp"
#include "ofds/errors.hpp"
#include "ofds/log.hpp"
#include "ofds/metrics.hpp"
#include "ofds/proposal_store.hpp"
#include "ofds/synth.hpp"

namespace ofds::cli {
namespace {

using json = nlohmann::ordered_json;

struct DatasetArgs {
  std::string proposals;
  std::string features;
  std::size_t feature_dim = 0;
  double min_area = kDefaultMinAreaFraction;
  double confidence = 0.0;
};

void add_dataset_options(CLI::App* cmd, DatasetArgs& a) {
  cmd->add_option("--proposals", a.proposals, "Manifest (JSON Lines)")->required();
  cmd->add_option("--features", a.features, "Feature blob")->required();
  cmd->add_option("--feature-dim", a.feature_dim, "Expected feature dimension (0 = any)");
}

void add_filter_options(CLI::App* cmd, DatasetArgs& a) {
  cmd->add_option("--min-area", a.min_area,
                  "Drop proposals whose box covers less than this fraction of the image")
      ->check(CLI::Range(0.0, 0.999999));
  cmd->add_option("--confidence", a.confidence, "Drop proposals below this confidence")
      ->check(CLI::Range(0.0, 1.0));
}

ProposalDataset load(const DatasetArgs& a, bool filter) {
  std::optional<std::size_t> dim;
  if (a.feature_dim > 0) dim = a.feature_dim;
  ProposalDataset ds = load_dataset(a.proposals, a.features, dim);
  if (!filter) return ds;
  return filter_by_confidence(filter_small_boxes(ds, a.min_area), a.confidence);
}

void emit(const std::string& text, const std::string& path, std::ostream& out) {
  if (path.empty() || path == "-") {
    out << text;
  } else {
    write_file_atomic(path, text);
  }
}

std::vector<std::uint64_t> parse_seeds(const std::vector<std::string>& items) {
  std::vector<std::uint64_t> seeds;
  for (const auto& item : items) {
    const auto dash = item.find('-');
    try {
      if (dash == std::string::npos) {
        seeds.push_back(std::stoull(item));
      } else {
        const auto lo = std::stoull(item.substr(0, dash));
        const auto hi = std::stoull(item.substr(dash + 1));
        if (hi < lo) throw UsageError("bad seed range '" + item + "'");
        for (auto s = lo; s <= hi; ++s) seeds.push_back(s);
      }
    } catch (const std::logic_error&) {
      throw UsageError("bad seed '" + item + "'");
    }
  }
  return seeds;
}

std::int64_t budget_from_fraction(const ProposalDataset& ds, UnitMode mode, double frac) {
  if (!(frac > 0.0 && frac <= 1.0)) throw UsageError("--budget-frac must be in (0,1]");
  const auto total = total_units(ds, mode);
  return std::max<std::int64_t>(1, std::llround(frac * static_cast<double>(total)));
}

json curve_json(const calibration::CurvePoint& p) {
  return json{{"threshold", p.threshold}, {"tp", p.tp},         {"fp", p.fp},
              {"fn", p.fn},               {"fpr", p.fpr},       {"precision", p.precision},
              {"recall", p.recall},       {"f1", p.f1}};
}

std::string fmt_double(double v) {
  std::ostringstream ss;
  ss.precision(6);
  ss << std::fixed << v;
  return ss.str();
}

}  // namespace

SelectionManifest run_method(const std::string& method, const ProposalDataset& dataset,
                             const BudgetSpec& budget, std::uint64_t seed, UnitMode mode,
                             const std::string& similarity_path, std::size_t kcenters_batch,
                             bool fill_budget) {
  if (method == "ofds") {
    engine::OfdsOptions opt;
    opt.seed = seed;
    opt.unit_mode = mode;
    opt.fill_budget = fill_budget;
    return engine::select(dataset, budget, opt);
  }
  if (method == "random") return baselines::select_random(dataset, budget, seed, mode);
  if (method == "kcenters") {
    baselines::KCentersOptions opt;
    opt.seed = seed;
    opt.batch_size = kcenters_batch;
    opt.unit_mode = mode;
    return baselines::select_kcenters(dataset, budget, opt);
  }
  if (method == "prototypes") return baselines::select_prototypes(dataset, budget, seed, mode);
  if (method == "retrieval") {
    if (similarity_path.empty()) throw UsageError("--similarity is required for retrieval");
    const auto table = baselines::load_similarity(similarity_path, dataset);
    return baselines::select_retrieval(dataset, table, budget, mode);
  }
  throw UsageError("unknown method '" + method + "'");
}

std::vector<CompareRow> compare(const ProposalDataset& dataset, const CompareRequest& request) {
  const double avg = request.avg_units > 0.0
                         ? request.avg_units
                         : engine::estimate_avg_units(dataset, request.unit_mode);
  std::vector<CompareRow> rows;
  for (const auto& method : request.methods) {
    for (auto units : request.budgets) {
      for (auto seed : request.seeds) {
        const BudgetSpec budget{units, avg};
        const auto sel = run_method(method, dataset, budget, seed, request.unit_mode,
                                    request.similarity_path, request.kcenters_batch);
        const auto stats = metrics::subset_stats(sel, dataset);
        const auto balance = metrics::balance_report(sel, dataset);
        CompareRow row;
        row.method = method;
        row.budget_units = units;
        row.seed = seed;
        row.images = stats.image_count;
        row.realized_units = stats.realized_units;
        row.realized_fraction = stats.realized_fraction;
        row.balance = balance.score;
        row.covered_classes = static_cast<std::size_t>(
            std::count(stats.covered.begin(), stats.covered.end(), true));
        row.num_classes = stats.covered.size();
        rows.push_back(std::move(row));
      }
    }
  }
  std::stable_sort(rows.begin(), rows.end(), [](const CompareRow& a, const CompareRow& b) {
    return std::tie(a.method, a.budget_units, a.seed) < std::tie(b.method, b.budget_units, b.seed);
  });
  return rows;
}

std::string compare_csv(const std::vector<CompareRow>& rows) {
  std::string out =
      "method,budget_units,seed,images,realized_units,realized_fraction,balance,covered_classes,"
      "num_classes\n";
  for (const auto& r : rows) {
    out += r.method + "," + std::to_string(r.budget_units) + "," + std::to_string(r.seed) + "," +
           std::to_string(r.images) + "," + std::to_string(r.realized_units) + "," +
           fmt_double(r.realized_fraction) + "," + fmt_double(r.balance) + "," +
           std::to_string(r.covered_classes) + "," + std::to_string(r.num_classes) + "\n";
  }
  return out;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Object-focused data selection under an annotation-unit budget", "ofds"};
  app.require_subcommand(1);

  // validate
  DatasetArgs validate_args;
  auto* validate = app.add_subcommand("validate", "Load and check a proposal dataset");
  add_dataset_options(validate, validate_args);

  // calibrate
  DatasetArgs cal_args;
  std::string cal_mode = "fpr";
  double cal_target = calibration::kDefaultTargetFpr;
  double cal_iou = calibration::kDefaultIouThreshold;
  std::string cal_out;
  auto* calibrate = app.add_subcommand("calibrate", "Pick a confidence threshold from reference data");
  add_dataset_options(calibrate, cal_args);
  calibrate->add_option("--mode", cal_mode)->check(CLI::IsMember({"fpr", "f1"}));
  calibrate->add_option("--target", cal_target, "Target false-positive rate")->check(CLI::Range(0.0, 1.0));
  calibrate->add_option("--iou", cal_iou, "IoU needed for a match")->check(CLI::Range(0.0, 1.0));
  calibrate->add_option("--out", cal_out, "Report path (default stdout)");

  // select
  DatasetArgs sel_args;
  std::string method;
  std::int64_t budget_units = 0;
  double budget_frac = 0.0;
  double avg_units = 0.0;
  bool estimate_avg = false;
  std::uint64_t seed = 0;
  std::string sel_out;
  std::string similarity;
  std::size_t batch = baselines::kDefaultKCentersBatch;
  std::string unit_mode = "proposals";
  bool no_fill = false;
  auto* select = app.add_subcommand("select", "Select images under a unit budget");
  add_dataset_options(select, sel_args);
  add_filter_options(select, sel_args);
  select->add_option("--method", method)
      ->required()
      ->check(CLI::IsMember({"ofds", "random", "kcenters", "prototypes", "retrieval"}));
  auto* b_opt = select->add_option("--budget", budget_units, "Budget in annotation units");
  auto* bf_opt = select->add_option("--budget-frac", budget_frac, "Budget as a fraction of all units");
  b_opt->excludes(bf_opt);
  auto* avg_opt = select->add_option("--avg-units", avg_units, "Estimated units per image (N_O)");
  auto* est_opt = select->add_flag("--estimate-avg-units", estimate_avg, "Estimate N_O from the data");
  avg_opt->excludes(est_opt);
  select->add_option("--seed", seed);
  select->add_option("--out", sel_out, "Manifest path")->required();
  select->add_option("--similarity", similarity, "Similarity table (retrieval)");
  select->add_option("--batch-size", batch, "K-Centers candidate batch size")->check(CLI::PositiveNumber);
  select->add_option("--unit-mode", unit_mode)->check(CLI::IsMember({"proposals", "ground_truth"}));
  select->add_flag("--no-fill", no_fill, "Single class sweep, leave leftover budget unspent");

  // balance / stats
  DatasetArgs bal_args;
  std::string bal_selection;
  std::string bal_out;
  std::string bal_csv;
  auto* balance = app.add_subcommand("balance", "Class balance score of a selection");
  add_dataset_options(balance, bal_args);
  add_filter_options(balance, bal_args);
  balance->add_option("--selection", bal_selection)->required();
  balance->add_option("--out", bal_out);
  balance->add_option("--csv", bal_csv, "Also write per-class counts as CSV");

  DatasetArgs st_args;
  std::string st_selection;
  std::string st_out;
  std::string st_csv;
  auto* stats = app.add_subcommand("stats", "Size and coverage of a selection");
  add_dataset_options(stats, st_args);
  add_filter_options(stats, st_args);
  stats->add_option("--selection", st_selection)->required();
  stats->add_option("--out", st_out);
  stats->add_option("--csv", st_csv, "Also write per-class rows as CSV");

  // synth
  std::string synth_spec;
  std::string synth_preset;
  std::string synth_out;
  std::uint64_t synth_seed = 0;
  double synth_sim_noise = 0.1;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic proposal dataset");
  auto* spec_opt = synth->add_option("--spec", synth_spec, "Spec JSON");
  auto* preset_opt =
      synth->add_option("--preset", synth_preset)->check(CLI::IsMember({"default", "imbalanced"}));
  spec_opt->excludes(preset_opt);
  auto* synth_seed_opt = synth->add_option("--seed", synth_seed, "Overrides the spec seed");
  synth->add_option("--similarity-noise", synth_sim_noise)->check(CLI::NonNegativeNumber);
  synth->add_option("--out", synth_out, "Output directory")->required();

  // compare
  DatasetArgs cmp_args;
  std::vector<std::string> cmp_methods;
  std::vector<std::int64_t> cmp_budgets;
  std::vector<double> cmp_fracs;
  std::vector<std::string> cmp_seeds{"0"};
  double cmp_avg = 0.0;
  std::string cmp_similarity;
  std::string cmp_out;
  std::string cmp_mode = "proposals";
  auto* cmp = app.add_subcommand("compare", "Grid of methods x budgets x seeds as CSV");
  add_dataset_options(cmp, cmp_args);
  add_filter_options(cmp, cmp_args);
  cmp->add_option("--methods", cmp_methods)->required()->delimiter(',');
  auto* cb = cmp->add_option("--budgets", cmp_budgets)->delimiter(',');
  auto* cf = cmp->add_option("--budget-fracs", cmp_fracs)->delimiter(',');
  cb->excludes(cf);
  cmp->add_option("--seeds", cmp_seeds, "Seeds, e.g. 0-9 or 1,4,7")->delimiter(',');
  cmp->add_option("--avg-units", cmp_avg, "N_O (default: estimate)");
  cmp->add_option("--similarity", cmp_similarity);
  cmp->add_option("--unit-mode", cmp_mode)->check(CLI::IsMember({"proposals", "ground_truth"}));
  cmp->add_option("--out", cmp_out, "CSV path (default stdout)");

  std::vector<std::string> argv_store{"ofds"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& s : argv_store) argv.push_back(s.data());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return kOk;
    }
    err << "ofds: " << e.what() << "\n";
    err << "run 'ofds --help' for usage\n";
    return kUsage;
  }

  try {
    if (*validate) {
      const auto ds = load(validate_args, false);
      json j{{"images", ds.images.size()},
             {"classes", ds.classes.size()},
             {"proposals", ds.proposals.size()},
             {"ground_truth", ds.ground_truth.size()},
             {"feature_dim", ds.features.dim()},
             {"errors", 0}};
      out << j.dump() << "\n";
      return kOk;
    }

    if (*calibrate) {
      const auto ds = load(cal_args, false);
      if (!ds.has_ground_truth()) throw DataError("calibrate needs ground-truth lines");
      const auto matched = calibration::match_proposals(ds.proposals, ds.ground_truth, cal_iou);
      const auto curve = calibration::sweep_thresholds(matched, ds.ground_truth.size());
      const auto choice = cal_mode == "fpr" ? calibration::threshold_for_fpr(curve, cal_target)
                                            : calibration::threshold_for_f1(curve);
      json pts = json::array();
      for (const auto& p : curve.points) pts.push_back(curve_json(p));
      json j{{"mode", cal_mode},
             {"threshold", choice.threshold},
             {"satisfiable", choice.satisfiable},
             {"fpr", choice.point.fpr},
             {"precision", choice.point.precision},
             {"recall", choice.point.recall},
             {"f1", choice.point.f1},
             {"curve", std::move(pts)}};
      emit(j.dump(2) + "\n", cal_out, out);
      if (!choice.satisfiable) {
        err << "ofds: no threshold reaches FPR <= " << cal_target << "\n";
        return kInfeasible;
      }
      return kOk;
    }

    if (*select) {
      if (b_opt->count() == 0 && bf_opt->count() == 0) {
        throw UsageError("one of --budget or --budget-frac is required");
      }
      if (method == "ofds" && avg_opt->count() == 0 && !estimate_avg) {
        throw UsageError("ofds needs --avg-units or --estimate-avg-units");
      }
      const UnitMode mode = unit_mode_from_string(unit_mode);
      const auto ds = load(sel_args, true);
      const std::int64_t units =
          b_opt->count() ? budget_units : budget_from_fraction(ds, mode, budget_frac);
      double n_o = avg_units;
      if (estimate_avg) n_o = engine::estimate_avg_units(ds, mode);
      if (avg_opt->count() == 0 && !estimate_avg) n_o = 1.0;
      const auto sel = run_method(method, ds, {units, n_o}, seed, mode, similarity, batch, !no_fill);
      write_manifest(sel, sel_out);
      return kOk;
    }

    if (*balance) {
      const auto ds = load(bal_args, true);
      const auto sel = read_manifest(bal_selection);
      const auto report = metrics::balance_report(sel, ds);
      json counts = json::object();
      std::string csv = "class,objects\n";
      for (std::size_t c = 0; c < report.counts.size(); ++c) {
        counts[ds.classes.names()[c]] = report.counts[c];
        csv += ds.classes.names()[c] + "," + std::to_string(report.counts[c]) + "\n";
      }
      json j{{"method", sel.method},
             {"balance", report.score},
             {"source", report.from_ground_truth ? "ground_truth" : "proposals"},
             {"counts", std::move(counts)}};
      emit(j.dump(2) + "\n", bal_out, out);
      if (!bal_csv.empty()) write_file_atomic(bal_csv, csv);
      return kOk;
    }

    if (*stats) {
      const auto ds = load(st_args, true);
      const auto sel = read_manifest(st_selection);
      const auto s = metrics::subset_stats(sel, ds);
      json per_class = json::object();
      std::string csv = "class,objects,covered\n";
      for (std::size_t c = 0; c < s.per_class_objects.size(); ++c) {
        const auto& name = ds.classes.names()[c];
        per_class[name] = {{"objects", s.per_class_objects[c]}, {"covered", bool(s.covered[c])}};
        csv += name + "," + std::to_string(s.per_class_objects[c]) + "," +
               (s.covered[c] ? "true" : "false") + "\n";
      }
      json j{{"method", sel.method},
             {"images", s.image_count},
             {"realized_units", s.realized_units},
             {"dataset_units", s.dataset_units},
             {"realized_fraction", s.realized_fraction},
             {"unit_mode", to_string(sel.unit_mode)},
             {"per_class", std::move(per_class)}};
      emit(j.dump(2) + "\n", st_out, out);
      if (!st_csv.empty()) write_file_atomic(st_csv, csv);
      return kOk;
    }

    if (*synth) {
      synth::SynthSpec spec;
      if (!synth_spec.empty()) {
        spec = synth::read_spec(synth_spec);
      } else if (synth_preset == "imbalanced") {
        spec = synth::imbalanced_spec();
      } else if (synth_preset == "default") {
        spec = synth::default_spec();
      } else {
        throw UsageError("one of --spec or --preset is required");
      }
      if (synth_seed_opt->count()) spec.seed = synth_seed;
      const auto ds = synth::generate(spec);
      const std::filesystem::path dir(synth_out);
      std::filesystem::create_directories(dir);
      write_dataset(ds, dir / "manifest.jsonl", dir / "features.bin");
      baselines::write_similarity(synth::similarity_table(ds, synth_sim_noise, spec.seed),
                                  dir / "similarity.jsonl");
      out << json{{"images", ds.images.size()},
                  {"proposals", ds.proposals.size()},
                  {"classes", ds.classes.size()},
                  {"out", dir.string()}}
                 .dump()
          << "\n";
      return kOk;
    }

    if (*cmp) {
      const auto ds = load(cmp_args, true);
      CompareRequest req;
      req.methods = cmp_methods;
      req.unit_mode = unit_mode_from_string(cmp_mode);
      req.seeds = parse_seeds(cmp_seeds);
      req.avg_units = cmp_avg;
      req.similarity_path = cmp_similarity;
      if (!cmp_budgets.empty()) {
        req.budgets = cmp_budgets;
      } else if (!cmp_fracs.empty()) {
        for (double f : cmp_fracs) req.budgets.push_back(budget_from_fraction(ds, req.unit_mode, f));
      } else {
        throw UsageError("one of --budgets or --budget-fracs is required");
      }
      emit(compare_csv(compare(ds, req)), cmp_out, out);
      return kOk;
    }
  } catch (const UsageError& e) {
    err << "ofds: " << e.what() << "\n";
    return kUsage;
  } catch (const InfeasibleError& e) {
    err << "ofds: " << e.what() << "\n";
    return kInfeasible;
  } catch (const std::exception& e) {
    err << "ofds: " << e.what() << "\n";
    return kDataError;
  }
  return kUsage;
}

int run(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(args, std::cout, std::cerr);
}

}  // namespace ofds::cli
