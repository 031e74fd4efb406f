#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

#include "fort/dataset.hpp"
#include "fort/functionals.hpp"

namespace fort {

// One instrument column: a base series evaluated at a lag. The canonical
// forecast error is e_t = x_t - y_t; `negate` covers the y - x variant.
enum class TermKind {
  Constant,
  Forecast,
  Realization,
  State,
  ForecastError,
  SquaredForecastError,
  IdentificationValue,
  CustomColumn,
};

struct InstrumentTerm {
  TermKind kind = TermKind::Constant;
  int lag = 0;
  bool negate = false;
  std::string column;  // CustomColumn only
};

struct InstrumentRecipe {
  std::vector<InstrumentTerm> terms;
  // Level at which the identification_value instrument evaluates
  // V(x_{t-k}, y_{t-k}); the level the original forecaster used is unknown
  // at instrument-construction time, so this is a free knob.
  double iv_level = 0.5;

  int max_lag() const;
  // Same terms with every non-constant lag increased by `extra`; the
  // "lagged instruments" configuration of the Monte Carlo study.
  InstrumentRecipe lagged(int extra = 1) const;
};

// Text form, one term per token: "const", "forecast", "realization",
// "state", "ferr", "sqferr", "iv", "col:<name>", each optionally "@<lag>",
// with a "-" prefix for negation, e.g. "const,forecast,-ferr@1,iv@1".
InstrumentRecipe parse_recipe(const std::string& text);
std::string recipe_to_string(const InstrumentRecipe& recipe);

struct InstrumentMatrix {
  Eigen::MatrixXd w;  // T_eff x q
  std::vector<std::string> labels;
  long dropped = 0;  // leading rows consumed by lags

  long q() const { return w.cols(); }
  long rows() const { return w.rows(); }
};

// Builds the instrument matrix and the aligned dataset tail. Row i of the
// matrix pairs with row (dropped + i) of the input dataset, so every
// instrument uses only information dated at or before its row.
struct AlignedInstruments {
  ForecastDataset data;  // rows max_lag .. T-1 of the input
  InstrumentMatrix w;
};

AlignedInstruments build_instruments(const ForecastDataset& ds,
                                     const InstrumentRecipe& recipe,
                                     Family family);

}  // namespace fort
