#include "compactml/report.hpp"

#include <algorithm>
#include <cstdio>

#include "compactml/error.hpp"

namespace compactml {

std::string format_number(double v) {
    if (v == 0.0) v = 0.0;  // folds -0 into +0
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

std::vector<ReportPoint> make_report_series(SeriesSplit split, std::span<const double> actual,
                                            std::span<const double> predicted) {
    if (actual.size() != predicted.size()) throw ShapeError("report: length mismatch");
    std::vector<ReportPoint> out(actual.size());
    for (std::size_t i = 0; i < actual.size(); ++i)
        out[i] = {split, i, actual[i], predicted[i], actual[i] - predicted[i]};
    return out;
}

std::string report_csv(const std::vector<ReportPoint>& series) {
    std::string s = "split,index,actual,predicted,error\n";
    for (const auto& p : series) {
        s += p.split == SeriesSplit::train ? "train" : "test";
        s += ',' + std::to_string(p.index) + ',' + format_number(p.actual) + ',' +
             format_number(p.predicted) + ',' + format_number(p.error) + '\n';
    }
    return s;
}

std::string leaderboard_tsv(const Leaderboard& board) {
    std::string s = "model\ttest_score\tval_score\n";
    for (const auto& r : board)
        s += r.model_name + '\t' + format_number(r.test_score) + '\t' + format_number(r.val_score) + '\n';
    return s;
}

std::string timings_tsv(const Leaderboard& board) {
    std::string s = "model\ttrain_time_s\n";
    for (const auto& r : board) s += r.model_name + '\t' + format_number(r.train_time_s) + '\n';
    return s;
}

std::string leaderboard_table(const Leaderboard& board) {
    const std::vector<std::string> header{"order", "model", "test_score", "val_score", "train_time_s"};
    std::vector<std::vector<std::string>> cells{header};
    for (std::size_t i = 0; i < board.size(); ++i)
        cells.push_back({std::to_string(i + 1), board[i].model_name, format_number(board[i].test_score),
                         format_number(board[i].val_score), format_number(board[i].train_time_s)});
    std::vector<std::size_t> width(header.size(), 0);
    for (const auto& row : cells)
        for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
    std::string s;
    for (const auto& row : cells) {
        for (std::size_t c = 0; c < row.size(); ++c) {
            s += row[c];
            if (c + 1 < row.size()) s += std::string(width[c] - row[c].size(), ' ') + '\t';
        }
        s += '\n';
    }
    return s;
}

std::string importance_tsv(const std::vector<ImportanceRow>& rows) {
    std::string s = "feature\timportance\tstd_dev\tp_value\tn\tp99_high\tp99_low\n";
    for (const auto& r : rows)
        s += r.feature + '\t' + format_number(r.importance) + '\t' + format_number(r.std_dev) + '\t' +
             format_number(r.p_value) + '\t' + std::to_string(r.n) + '\t' +
             format_number(r.p99_high) + '\t' + format_number(r.p99_low) + '\n';
    return s;
}

}  // namespace compactml
