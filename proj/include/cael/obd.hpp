#pragma once

#include <optional>
#include <string>

#include "cael/estimators.hpp"
#include "cael/types.hpp"

namespace cael::obd {

/// How one context column is turned into features: numeric passthrough or
/// one-hot over a declared vocabulary (unknown levels encode as all zeros).
struct ContextColumn {
  std::string name;
  bool categorical = false;
  std::vector<std::string> levels;

  int width() const {
    return categorical ? static_cast<int>(levels.size()) : 1;
  }
};

/// Declarative description of a logged-bandit CSV layout.
struct ColumnMapping {
  std::string action_column = "action";
  std::string reward_column = "reward";
  std::string propensity_column = "propensity";
  std::vector<ContextColumn> context_columns;
  char delimiter = ',';
  bool has_header = true;
  std::optional<int> num_actions;  // override for K (else max id + 1)
  std::optional<int> context_dim;  // declared d, checked when present

  int encoded_dim() const;
  void validate() const;

  static ColumnMapping from_json_file(const std::string& path);
  static ColumnMapping from_json(const std::string& json_text);
  std::string to_json() const;
};

/// Mapping matching the Open Bandit Dataset "random" campaign layout
/// (K = 240). Categorical vocabularies must be filled in from the slice in
/// use; see the bundled configs/obd_random_mapping.json.
ColumnMapping default_obd_mapping();

/// Encodes one raw row slice (the mapped context cells, in mapping order)
/// into a fixed-length feature vector.
ContextVector encode_context(const std::vector<std::string>& raw_fields,
                             const ColumnMapping& mapping);

/// Loads a delimiter-separated file into a Dataset. Deterministic and
/// order-preserving. Throws SchemaError for missing columns, ParseError
/// (with the row number) for bad cells, DataError for non-positive
/// propensities.
Dataset load_csv(const std::string& path, const ColumnMapping& mapping,
                 std::optional<long> max_rows = std::nullopt);

/// Writes a dataset in the plain numeric schema x0..x{d-1},action,reward,
/// propensity; a file written here round-trips through load_csv with
/// default_numeric_mapping().
void save_csv(const Dataset& data, const std::string& path);
ColumnMapping default_numeric_mapping(int context_dim);

/// Loads per-row target-policy action probabilities: header prob_0..prob_{K-1}
/// (or K unnamed columns), one row per dataset row. Each row is validated as
/// a probability vector.
estimators::ActionProbs load_action_probs_csv(const std::string& path, int K,
                                              std::optional<long> max_rows =
                                                  std::nullopt);

}  // namespace cael::obd
