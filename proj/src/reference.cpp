#include "keyflux/reference.hpp"

#include <algorithm>
#include <array>
#include <cstddef>

namespace keyflux::reference {

namespace {

using Row5 = std::array<double, 5>;

// Rows follow kAllKinds order: LB, JB, JLB, TB, MB, HY.
constexpr std::array<Row5, 6> kRiskMax{{
    {0.035, 0.052, 0.069, 0.085, 0.101},
    {0.035, 0.052, 0.069, 0.087, 0.104},
    {0.029, 0.034, 0.044, 0.052, 0.062},
    {0.074, 0.139, 0.259, 0.36, 0.443},
    {0.029, 0.064, 0.098, 0.139, 0.18},
    {0.027, 0.044, 0.062, 0.081, 0.099},
}};

constexpr std::array<Row5, 6> kRiskAverage{{
    {0.035, 0.052, 0.069, 0.085, 0.101},
    {0.035, 0.052, 0.069, 0.085, 0.101},
    {0.029, 0.034, 0.044, 0.052, 0.061},
    {0.072, 0.137, 0.196, 0.249, 0.298},
    {0.025, 0.048, 0.072, 0.094, 0.115},
    {0.027, 0.044, 0.060, 0.076, 0.092},
}};

constexpr std::array<Row5, 6> kCostBefore{{
    {4.089, 1.919, 1.196, 0.835, 0.618},
    {3.817, 1.658, 0.938, 0.801, 0.591},
    {8.041, 3.847, 2.301, 1.859, 1.408},
    {0.755, 0.438, 0.327, 0.246, 0.196},
    {2.960, 1.482, 0.931, 0.742, 0.592},
    {7.920, 2.562, 1.515, 1.066, 0.782},
}};

constexpr std::array<Row5, 6> kCostAfter{{
    {4.088, 2.044, 1.363, 1.022, 0.817},
    {4.088, 2.044, 1.363, 1.022, 0.817},
    {8.175, 4.088, 2.725, 2.044, 1.635},
    {1.000, 0.500, 0.333, 0.250, 0.200},
    {2.985, 1.495, 0.993, 0.749, 0.591},
    {8.232, 2.959, 1.736, 1.221, 0.940},
}};

constexpr std::array<std::array<int, 5>, 6> kStabilisation{{
    {1, 2, 2, 2, 2},
    {1, 1, 1, 2, 2},
    {2, 1, 1, 2, 2},
    {2, 8, 77, 120, 120},
    {22, 54, 11, 120, 120},
    {1, 1, 2, 3, 3},
}};

struct Cell {
  std::size_t states;
  std::size_t transitions;
};

// [kind][threshold position][max position] for max = 50, 100, 500.
constexpr std::array<std::array<std::array<Cell, 3>, 5>, 6> kStateSpace{{
    {{
        {{{101, 349}, {201, 699}, {1001, 3499}}},
        {{{203, 749}, {403, 1499}, {2003, 7499}}},
        {{{305, 1149}, {605, 2299}, {3005, 11499}}},
        {{{407, 1549}, {807, 3099}, {4007, 15499}}},
        {{{509, 1949}, {1009, 3899}, {5009, 19499}}},
    }},
    {{
        {{{102, 400}, {202, 800}, {1002, 4000}}},
        {{{204, 800}, {404, 1600}, {2004, 8000}}},
        {{{306, 1200}, {606, 2400}, {3006, 12000}}},
        {{{408, 1600}, {808, 3200}, {4008, 16000}}},
        {{{510, 2000}, {1010, 4000}, {5010, 20000}}},
    }},
    {{
        {{{101, 349}, {201, 699}, {1001, 3499}}},
        {{{101, 374}, {201, 749}, {1001, 3749}}},
        {{{305, 1149}, {605, 2299}, {3005, 11499}}},
        {{{203, 774}, {403, 1549}, {2003, 7749}}},
        {{{509, 1949}, {1009, 3899}, {5009, 19499}}},
    }},
    {{
        {{{10200, 50200}, {20200, 100200}, {100200, 500200}}},
        {{{10200, 50200}, {20200, 100200}, {100200, 500200}}},
        {{{10200, 50200}, {20200, 100200}, {100200, 500200}}},
        {{{10200, 50200}, {20200, 100200}, {100200, 500200}}},
        {{{10200, 50200}, {20200, 100200}, {100200, 500200}}},
    }},
    {{
        {{{51000, 199950}, {101000, 399900}, {501000, 1999500}}},
        {{{102000, 399950}, {202000, 799900}, {1002000, 3999500}}},
        {{{153000, 599950}, {303000, 1199900}, {1503000, 5999500}}},
        {{{204000, 799950}, {404000, 1599900}, {2004000, 7999500}}},
        {{{255000, 999950}, {505000, 1999900}, {2505000, 9999500}}},
    }},
    {{
        {{{10100, 45000}, {20100, 90000}, {100100, 450000}}},
        {{{40300, 189500}, {80300, 379500}, {400300, 1899500}}},
        {{{90100, 431300}, {180100, 866300}, {900100, 4346300}}},
        {{{159100, 768400}, {319100, 1548400}, {1599100, 7788400}}},
        {{{246900, 1198800}, {496900, 2423800}, {2496900, 12223800}}},
    }},
}};

std::size_t kind_row(StrategyKind kind) { return static_cast<std::size_t>(kind); }

std::optional<std::size_t> threshold_column(StrategyKind kind, int threshold) {
  const auto grid = default_thresholds(kind);
  const auto it = std::find(grid.begin(), grid.end(), threshold);
  if (it == grid.end()) return std::nullopt;
  return static_cast<std::size_t>(it - grid.begin());
}

template <class Table>
auto lookup(const Table& table, StrategyKind kind, int threshold)
    -> std::optional<std::decay_t<decltype(table[0][0])>> {
  const auto col = threshold_column(kind, threshold);
  if (!col) return std::nullopt;
  return table[kind_row(kind)][*col];
}

}  // namespace

std::optional<double> risk_max(StrategyKind kind, int threshold) { return lookup(kRiskMax, kind, threshold); }
std::optional<double> risk_average(StrategyKind kind, int threshold) { return lookup(kRiskAverage, kind, threshold); }
std::optional<double> cost_before(StrategyKind kind, int threshold) { return lookup(kCostBefore, kind, threshold); }
std::optional<double> cost_after(StrategyKind kind, int threshold) { return lookup(kCostAfter, kind, threshold); }
std::optional<int> stabilisation_month(StrategyKind kind, int threshold) {
  return lookup(kStabilisation, kind, threshold);
}

std::vector<int> table_max_values() { return {50, 100, 500}; }

std::optional<StateSpaceSummary> state_space(StrategyKind kind, int threshold, int max) {
  const auto col = threshold_column(kind, threshold);
  const auto maxes = table_max_values();
  const auto m = std::find(maxes.begin(), maxes.end(), max);
  if (!col || m == maxes.end()) return std::nullopt;
  const Cell& c = kStateSpace[kind_row(kind)][*col][static_cast<std::size_t>(m - maxes.begin())];
  return StateSpaceSummary{c.states, c.transitions};
}

}  // namespace keyflux::reference
