#pragma once

#include <span>
#include <string>
#include <vector>

#include "compactml/automl.hpp"
#include "compactml/importance.hpp"

namespace compactml {

// Every number in emitted TSV/CSV files goes through here: six significant
// digits, '.' decimal point, no negative zero.
std::string format_number(double v);

enum class SeriesSplit { train, test };

struct ReportPoint {
    SeriesSplit split = SeriesSplit::train;
    std::size_t index = 0;
    double actual = 0;
    double predicted = 0;
    double error = 0;  // actual - predicted
};

std::vector<ReportPoint> make_report_series(SeriesSplit split, std::span<const double> actual,
                                            std::span<const double> predicted);

std::string report_csv(const std::vector<ReportPoint>& series);

// Deterministic file form: model, test_score, val_score.
std::string leaderboard_tsv(const Leaderboard& board);
std::string timings_tsv(const Leaderboard& board);

// Human form for stdout, aligned, including training time.
std::string leaderboard_table(const Leaderboard& board);

std::string importance_tsv(const std::vector<ImportanceRow>& rows);

}  // namespace compactml
