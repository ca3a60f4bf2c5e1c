#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "tabunas/search.hpp"

namespace tabunas {

// Quotes a CSV field when it holds a comma, quote or line break.
std::string csv_field(const std::string& s);

// Shortest text that parses back to the same double; "inf", "-inf", "nan".
std::string format_double(double x);

// Column orders:
//   ranking.csv        hash,score,n_a,params,degenerate
//   final_ranking.csv  hash,score,n_a,params,degenerate,grade
//   evals.csv          hash,accuracy,params,grade,epochs
//   trajectory-*.csv   iteration,child_hash,reward,accuracy,params,grade,accepted,tabu_size
std::string ranking_csv(const std::vector<RankingEntry>& ranking);
std::string final_ranking_csv(const std::vector<RankingEntry>& ranking);
std::string evals_csv(const std::vector<EvalResult>& evals);
std::string trajectory_csv(const std::vector<TrajectoryRecord>& records);

// One JSON object per line.
std::string mutations_jsonl(const std::vector<MutationRecord>& records);

void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

std::string trajectory_file_name(const GenomeHash& parent);

}  // namespace tabunas
