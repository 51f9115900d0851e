#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "ofds/dataset.hpp"
#include "ofds/selection.hpp"

namespace ofds::cli {

enum ExitCode : int {
  kOk = 0,
  kUsage = 1,
  kDataError = 2,
  kInfeasible = 3,
};

// args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, char** argv);

struct CompareRow {
  std::string method;
  std::int64_t budget_units = 0;
  std::uint64_t seed = 0;
  std::size_t images = 0;
  std::int64_t realized_units = 0;
  double realized_fraction = 0.0;
  double balance = 0.0;
  std::size_t covered_classes = 0;
  std::size_t num_classes = 0;
};

struct CompareRequest {
  std::vector<std::string> methods;
  std::vector<std::int64_t> budgets;
  std::vector<std::uint64_t> seeds;
  double avg_units = 0.0;  // 0 means estimate from the dataset
  std::string similarity_path;
  UnitMode unit_mode = UnitMode::kProposals;
  std::size_t kcenters_batch = 512;
};

// Runs every (method, budget, seed) cell; rows sorted by (method, budget, seed).
std::vector<CompareRow> compare(const ProposalDataset& dataset, const CompareRequest& request);
std::string compare_csv(const std::vector<CompareRow>& rows);

// Dispatches one selection by method name.
SelectionManifest run_method(const std::string& method, const ProposalDataset& dataset,
                             const BudgetSpec& budget, std::uint64_t seed, UnitMode mode,
                             const std::string& similarity_path, std::size_t kcenters_batch,
                             bool fill_budget = true);

}  // namespace ofds::cli
