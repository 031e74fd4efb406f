#include "fort/instruments.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace fort {

namespace {

struct TermName {
  const char* token;
  TermKind kind;
};
constexpr TermName kTermNames[] = {
    {"const", TermKind::Constant},
    {"forecast", TermKind::Forecast},
    {"realization", TermKind::Realization},
    {"state", TermKind::State},
    {"ferr", TermKind::ForecastError},
    {"sqferr", TermKind::SquaredForecastError},
    {"iv", TermKind::IdentificationValue},
};

const char* term_token(TermKind kind) {
  for (const auto& tn : kTermNames) {
    if (tn.kind == kind) return tn.token;
  }
  return "col";
}

}  // namespace

int InstrumentRecipe::max_lag() const {
  int m = 0;
  for (const auto& t : terms) m = std::max(m, t.lag);
  return m;
}

InstrumentRecipe InstrumentRecipe::lagged(int extra) const {
  if (extra < 0) throw std::invalid_argument("lagged: extra must be >= 0");
  InstrumentRecipe out = *this;
  for (auto& t : out.terms) {
    if (t.kind != TermKind::Constant) t.lag += extra;
  }
  return out;
}

InstrumentRecipe parse_recipe(const std::string& text) {
  InstrumentRecipe recipe;
  std::stringstream ss(text);
  std::string token;
  while (std::getline(ss, token, ',')) {
    // trim
    size_t a = token.find_first_not_of(" \t");
    size_t b = token.find_last_not_of(" \t");
    if (a == std::string::npos) continue;
    token = token.substr(a, b - a + 1);

    InstrumentTerm term;
    if (!token.empty() && token[0] == '-') {
      term.negate = true;
      token = token.substr(1);
    }
    std::string name = token;
    if (auto at = token.find('@'); at != std::string::npos) {
      name = token.substr(0, at);
      std::string lag_str = token.substr(at + 1);
      try {
        size_t pos = 0;
        term.lag = std::stoi(lag_str, &pos);
        if (pos != lag_str.size()) throw std::invalid_argument(lag_str);
      } catch (const std::exception&) {
        throw std::invalid_argument("instrument term '" + token +
                                    "': bad lag '" + lag_str + "'");
      }
      if (term.lag < 0) {
        throw std::invalid_argument("instrument term '" + token +
                                    "': lag must be >= 0");
      }
    }
    if (name.rfind("col:", 0) == 0) {
      term.kind = TermKind::CustomColumn;
      term.column = name.substr(4);
      if (term.column.empty()) {
        throw std::invalid_argument("instrument term 'col:' needs a name");
      }
    } else {
      bool found = false;
      for (const auto& tn : kTermNames) {
        if (name == tn.token) {
          term.kind = tn.kind;
          found = true;
          break;
        }
      }
      if (!found) {
        throw std::invalid_argument("unknown instrument term '" + name + "'");
      }
    }
    recipe.terms.push_back(term);
  }
  if (recipe.terms.empty()) {
    throw std::invalid_argument("instrument recipe is empty");
  }
  return recipe;
}

std::string recipe_to_string(const InstrumentRecipe& recipe) {
  std::string out;
  for (size_t i = 0; i < recipe.terms.size(); ++i) {
    const auto& t = recipe.terms[i];
    if (i) out += ",";
    if (t.negate) out += "-";
    if (t.kind == TermKind::CustomColumn) {
      out += "col:" + t.column;
    } else {
      out += term_token(t.kind);
    }
    if (t.lag > 0) out += "@" + std::to_string(t.lag);
  }
  return out;
}

AlignedInstruments build_instruments(const ForecastDataset& ds,
                                     const InstrumentRecipe& recipe,
                                     Family family) {
  ds.validate();
  if (recipe.terms.empty()) {
    throw std::invalid_argument("build_instruments: empty recipe");
  }
  const long T = ds.T();
  const int max_lag = recipe.max_lag();
  if (max_lag > T - 2) {
    throw std::invalid_argument("build_instruments: lag " +
                                std::to_string(max_lag) +
                                " leaves fewer than 2 rows (T = " +
                                std::to_string(T) + ")");
  }
  if (!(recipe.iv_level > 0.0 && recipe.iv_level < 1.0)) {
    throw std::invalid_argument(
        "build_instruments: iv_level must lie in (0,1)");
  }
  const long T_eff = T - max_lag;
  const long q = static_cast<long>(recipe.terms.size());

  AlignedInstruments out;
  out.w.w.resize(T_eff, q);
  out.w.dropped = max_lag;

  for (long j = 0; j < q; ++j) {
    const auto& term = recipe.terms[static_cast<size_t>(j)];
    const std::vector<double>* custom = nullptr;
    if (term.kind == TermKind::CustomColumn) {
      auto it = ds.extra.find(term.column);
      if (it == ds.extra.end()) {
        throw std::invalid_argument("instrument column '" + term.column +
                                    "' not present in dataset");
      }
      custom = &it->second;
    }
    for (long i = 0; i < T_eff; ++i) {
      auto row = static_cast<size_t>(max_lag + i - term.lag);
      double v = 0.0;
      switch (term.kind) {
        case TermKind::Constant:
          v = 1.0;
          break;
        case TermKind::Forecast:
          v = ds.x[row];
          break;
        case TermKind::Realization:
          v = ds.y[row];
          break;
        case TermKind::State:
          v = ds.z[row];
          break;
        case TermKind::ForecastError:
          v = ds.x[row] - ds.y[row];
          break;
        case TermKind::SquaredForecastError: {
          double e = ds.x[row] - ds.y[row];
          v = e * e;
          break;
        }
        case TermKind::IdentificationValue:
          v = identification(family, ds.x[row], ds.y[row], recipe.iv_level);
          break;
        case TermKind::CustomColumn:
          v = (*custom)[row];
          break;
      }
      out.w.w(i, j) = term.negate ? -v : v;
    }
    std::string label = recipe_to_string(InstrumentRecipe{{term}, 0.5});
    out.w.labels.push_back(label);
  }

  if (!out.w.w.allFinite()) {
    throw std::invalid_argument("build_instruments: non-finite instrument");
  }
  for (long j = 0; j < q; ++j) {
    if (out.w.w.col(j).cwiseAbs().maxCoeff() == 0.0) {
      throw std::invalid_argument("instrument column '" +
                                  out.w.labels[static_cast<size_t>(j)] +
                                  "' is identically zero");
    }
  }

  out.data = ds.tail(max_lag);
  return out;
}

}  // namespace fort
