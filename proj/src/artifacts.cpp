#include "tabunas/artifacts.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "tabunas/errors.hpp"

namespace tabunas {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

namespace {

const char* flag(bool b) { return b ? "1" : "0"; }

void ranking_row(std::ostringstream& os, const RankingEntry& e) {
  os << e.hash.hex() << ',' << format_double(e.score) << ',' << e.activation_units << ','
     << e.params << ',' << flag(e.degenerate);
}

}  // namespace

std::string ranking_csv(const std::vector<RankingEntry>& ranking) {
  std::ostringstream os;
  os << "hash,score,n_a,params,degenerate\n";
  for (const auto& e : ranking) {
    ranking_row(os, e);
    os << '\n';
  }
  return os.str();
}

std::string final_ranking_csv(const std::vector<RankingEntry>& ranking) {
  std::ostringstream os;
  os << "hash,score,n_a,params,degenerate,grade\n";
  for (const auto& e : ranking) {
    ranking_row(os, e);
    os << ',' << (e.grade ? format_double(*e.grade) : "") << '\n';
  }
  return os.str();
}

std::string evals_csv(const std::vector<EvalResult>& evals) {
  std::ostringstream os;
  os << "hash,accuracy,params,grade,epochs\n";
  for (const auto& e : evals) {
    os << e.hash.hex() << ',' << format_double(e.grade.accuracy) << ',' << e.grade.params << ','
       << format_double(e.grade.grade) << ',' << e.epochs << '\n';
  }
  return os.str();
}

std::string trajectory_csv(const std::vector<TrajectoryRecord>& records) {
  std::ostringstream os;
  os << "iteration,child_hash,reward,accuracy,params,grade,accepted,tabu_size\n";
  for (const auto& r : records) {
    os << r.iteration << ',' << (r.child_hash ? r.child_hash->hex() : "") << ','
       << (r.child_hash ? format_double(r.reward) : "") << ',' << format_double(r.accuracy) << ','
       << r.params << ',' << format_double(r.grade) << ',' << flag(r.accepted) << ','
       << r.tabu_size << '\n';
  }
  return os.str();
}

std::string mutations_jsonl(const std::vector<MutationRecord>& records) {
  std::string out;
  for (const auto& r : records) {
    out += to_json(r).dump();
    out += '\n';
  }
  return out;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open " + path.string() + " for writing");
  f << text;
  if (!f) throw IoError("failed writing " + path.string());
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path.string());
  std::ostringstream os;
  os << f.rdbuf();
  return os.str();
}

std::string trajectory_file_name(const GenomeHash& parent) {
  return "trajectory-" + parent.hex() + ".csv";
}

}  // namespace tabunas
