#include "traitgrade/report.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include "traitgrade/dataset.hpp"
#include "traitgrade/errors.hpp"
#include "traitgrade/metrics.hpp"

namespace traitgrade {

namespace {

namespace fs = std::filesystem;

std::optional<int> parse_int(std::string_view s) {
  int v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, sep)) out.push_back(field);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

std::string fmt(double v, int digits = 3) {
  std::ostringstream o;
  o << std::fixed << std::setprecision(digits) << v;
  return o.str();
}

std::string strip_cr(std::string s) {
  if (!s.empty() && s.back() == '\r') s.pop_back();
  return s;
}

// Holistic columns in display order.
const std::vector<std::pair<std::string, std::string>>& system_columns() {
  static const std::vector<std::pair<std::string, std::string>> cols{
      {"stl-lstm", "STL-LSTM"},           {"stl-bilstm", "STL-BiLSTM"},
      {"mtl-lstm", "MTL-LSTM"},           {"mtl-bilstm", "MTL-BiLSTM"},
      {"pipeline-lstm", "Pipeline-LSTM"}, {"pipeline-bilstm", "Pipeline-BiLSTM"},
  };
  return cols;
}

// Config under which a trait's QWK is recorded: STL runs carry the trait in
// their name ("stl-lstm.content"), MTL runs report every trait head.
std::string trait_system(const std::string& config) {
  const auto dot = config.find('.');
  return dot == std::string::npos ? config : config.substr(0, dot);
}

}  // namespace

std::vector<int> EvalReport::prompts() const {
  std::set<int> s;
  for (const auto& c : cells_) s.insert(c.prompt);
  return {s.begin(), s.end()};
}

std::vector<std::string> EvalReport::configs() const {
  std::set<std::string> s;
  for (const auto& c : cells_) s.insert(c.config);
  return {s.begin(), s.end()};
}

std::map<int, double> EvalReport::fold_values(int prompt, const std::string& config, const std::string& head) const {
  std::map<int, double> out;
  for (const auto& c : cells_)
    if (c.prompt == prompt && c.config == config && c.head == head) out[c.fold] = c.qwk;
  return out;
}

std::optional<double> EvalReport::fold_mean(int prompt, const std::string& config, const std::string& head) const {
  const auto values = fold_values(prompt, config, head);
  if (values.empty()) return std::nullopt;
  double sum = 0;
  for (const auto& [_, v] : values) sum += v;
  return sum / static_cast<double>(values.size());
}

std::optional<double> EvalReport::prompt_mean(const std::string& config, const std::string& head) const {
  double sum = 0;
  int n = 0;
  for (int p : prompts()) {
    if (auto m = fold_mean(p, config, head)) {
      sum += *m;
      ++n;
    }
  }
  if (n == 0) return std::nullopt;
  return sum / n;
}

void EvalReport::set_essay_errors(int prompt, const std::string& config, const std::string& head,
                                  std::map<std::int64_t, double> errors) {
  essay_errors_[{prompt, config, head}] = std::move(errors);
}

std::optional<SignificanceResult> EvalReport::compare(int prompt, const std::string& better,
                                                      const std::string& baseline, const std::string& head) const {
  std::vector<double> xa, xb;
  if (pairing_ == Pairing::fold) {
    const auto a = fold_values(prompt, better, head);
    const auto b = fold_values(prompt, baseline, head);
    for (const auto& [fold, v] : a) {
      auto it = b.find(fold);
      if (it == b.end()) continue;
      xa.push_back(v);
      xb.push_back(it->second);
    }
  } else {
    // Lower squared error is better, so the baseline's errors come first.
    auto a = essay_errors_.find({prompt, better, head});
    auto b = essay_errors_.find({prompt, baseline, head});
    if (a == essay_errors_.end() || b == essay_errors_.end()) return std::nullopt;
    for (const auto& [id, e] : a->second) {
      auto it = b->second.find(id);
      if (it == b->second.end()) continue;
      xa.push_back(it->second);
      xb.push_back(e);
    }
  }
  if (xa.size() < 2) return std::nullopt;
  const auto t = paired_t_test(xa, xb);
  SignificanceResult r;
  r.p = t.p;
  r.mean_difference = t.mean_difference;
  r.pairs = xa.size();
  r.significant = t.p < 0.05 && t.mean_difference > 0;
  return r;
}

EvalReport assemble_report(const fs::path& runs_dir, Pairing pairing) {
  if (!fs::is_directory(runs_dir)) throw ArgumentError("runs directory " + runs_dir.string() + " does not exist");
  std::vector<ReportCell> cells;
  std::vector<std::string> warnings;
  std::map<std::tuple<int, std::string, std::string>, std::map<std::int64_t, double>> errors;
  std::vector<fs::path> prompt_dirs;
  for (const auto& e : fs::directory_iterator(runs_dir))
    if (e.is_directory() && parse_int(e.path().filename().string())) prompt_dirs.push_back(e.path());
  std::sort(prompt_dirs.begin(), prompt_dirs.end());

  for (const auto& pdir : prompt_dirs) {
    const int prompt = *parse_int(pdir.filename().string());
    std::vector<fs::path> config_dirs;
    for (const auto& e : fs::directory_iterator(pdir))
      if (e.is_directory()) config_dirs.push_back(e.path());
    std::sort(config_dirs.begin(), config_dirs.end());
    for (const auto& cdir : config_dirs) {
      const std::string config = cdir.filename().string();
      std::set<int> present;
      for (const auto& e : fs::directory_iterator(cdir)) {
        const auto fold = parse_int(e.path().filename().string());
        if (!e.is_directory() || !fold) continue;
        std::ifstream in(e.path() / "test_scores.csv");
        if (!in) continue;
        std::string line;
        std::getline(in, line);
        while (std::getline(in, line)) {
          line = strip_cr(line);
          if (line.empty()) continue;
          const auto f = split(line, ',');
          if (f.size() != 2) throw ArgumentError("malformed line in " + (e.path() / "test_scores.csv").string());
          cells.push_back({prompt, config, f[0], *fold, std::stod(f[1])});
        }
        present.insert(*fold);
        if (pairing == Pairing::essay) {
          std::ifstream pin(e.path() / "predictions.csv");
          std::getline(pin, line);
          while (std::getline(pin, line)) {
            const auto f = split(strip_cr(line), ',');
            if (f.size() != 4) continue;
            const double d = std::stod(f[3]) - std::stod(f[2]);
            errors[{prompt, config, f[1]}][std::stoll(f[0])] = d * d;
          }
        }
      }
      std::string missing;
      for (int k = 0; k < kFoldCount; ++k)
        if (!present.count(k)) missing += (missing.empty() ? "" : ", ") + std::to_string(k);
      if (!missing.empty())
        warnings.push_back("partial report: prompt " + std::to_string(prompt) + " " + config + " lacks fold(s) " +
                           missing);
    }
  }
  std::sort(cells.begin(), cells.end(), [](const ReportCell& a, const ReportCell& b) {
    return std::tie(a.prompt, a.config, a.head, a.fold) < std::tie(b.prompt, b.config, b.head, b.fold);
  });
  EvalReport report(std::move(cells));
  report.warnings() = std::move(warnings);
  report.set_pairing(pairing);
  for (auto& [key, e] : errors) report.set_essay_errors(std::get<0>(key), std::get<1>(key), std::get<2>(key), std::move(e));
  return report;
}

void write_report_csv(std::ostream& out, const EvalReport& report) {
  out << "prompt,config,head,fold,qwk\n";
  out << std::setprecision(17);
  for (const auto& c : report.cells())
    out << c.prompt << ',' << c.config << ',' << c.head << ',' << c.fold << ',' << c.qwk << '\n';
}

EvalReport read_report_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || strip_cr(line) != "prompt,config,head,fold,qwk")
    throw ArgumentError("report CSV lacks its header");
  std::vector<ReportCell> cells;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    line = strip_cr(line);
    if (line.empty()) continue;
    const auto f = split(line, ',');
    const auto prompt = f.size() == 5 ? parse_int(f[0]) : std::nullopt;
    const auto fold = f.size() == 5 ? parse_int(f[3]) : std::nullopt;
    if (!prompt || !fold) throw ArgumentError("malformed report CSV line " + std::to_string(lineno));
    cells.push_back({*prompt, f[1], f[2], *fold, std::stod(f[4])});
  }
  return EvalReport(std::move(cells));
}

std::string render_markdown(const EvalReport& report) {
  std::vector<std::pair<std::string, std::string>> cols;
  const auto configs = report.configs();
  for (const auto& c : system_columns())
    if (std::find(configs.begin(), configs.end(), c.first) != configs.end()) cols.push_back(c);

  std::ostringstream md;
  md << "# Holistic scoring QWK\n\n| Prompt |";
  for (const auto& [_, label] : cols) md << ' ' << label << " |";
  md << "\n|---|";
  for (std::size_t i = 0; i < cols.size(); ++i) md << "---|";
  md << '\n';
  const std::string overall(kOverall);
  for (int p : report.prompts()) {
    md << "| " << p << " |";
    for (const auto& [config, _] : cols) {
      const auto m = report.fold_mean(p, config, overall);
      if (!m) {
        md << " - |";
        continue;
      }
      std::string marks;
      if (config.rfind("mtl-", 0) == 0) {
        if (auto s = report.compare(p, config, "stl-lstm", overall); s && s->significant) marks += '*';
        if (config == "mtl-bilstm")
          if (auto s = report.compare(p, config, "mtl-lstm", overall); s && s->significant) marks += "⋆";
      }
      md << ' ' << fmt(*m) << marks << " |";
    }
    md << '\n';
  }
  md << "| Mean |";
  for (const auto& [config, _] : cols) {
    const auto m = report.prompt_mean(config, overall);
    md << ' ' << (m ? fmt(*m) : "-") << " |";
  }
  md << "\n\nSignificance: two-sided paired t-test over "
     << (report.pairing() == Pairing::fold ? "per-fold QWK" : "per-essay squared error")
     << ", p < 0.05. * MTL system over STL-LSTM; ⋆ MTL-BiLSTM over MTL-LSTM.\n";

  // Trait heads.
  std::map<std::string, std::map<std::string, double>> traits;
  std::set<std::string> trait_systems;
  for (const auto& config : configs) {
    if (config.find("-minus-") != std::string::npos) continue;
    std::set<std::string> heads;
    for (const auto& c : report.cells())
      if (c.config == config && c.head != overall) heads.insert(c.head);
    for (const auto& h : heads)
      if (auto m = report.prompt_mean(config, h)) {
        traits[h][trait_system(config)] = *m;
        trait_systems.insert(trait_system(config));
      }
  }
  if (!traits.empty()) {
    md << "\n# Trait scoring QWK (mean over prompts)\n\n| Trait |";
    for (const auto& s : trait_systems) md << ' ' << s << " |";
    md << "\n|---|";
    for (std::size_t i = 0; i < trait_systems.size(); ++i) md << "---|";
    md << '\n';
    for (const auto& [trait, by_system] : traits) {
      md << "| " << trait << " |";
      for (const auto& s : trait_systems) {
        auto it = by_system.find(s);
        md << ' ' << (it == by_system.end() ? "-" : fmt(it->second)) << " |";
      }
      md << '\n';
    }
  }

  // Ablations: base MTL mean minus the ablated model's mean.
  std::ostringstream abl;
  for (int p : report.prompts())
    for (const auto& config : configs) {
      const auto pos = config.find("-minus-");
      if (pos == std::string::npos) continue;
      const std::string base = config.substr(0, pos);
      const std::string trait = config.substr(pos + 7);
      const auto b = report.fold_mean(p, base, overall);
      const auto a = report.fold_mean(p, config, overall);
      if (!b || !a) continue;
      abl << "| " << p << " | " << base << " | " << trait << " | " << fmt(*b - *a, 4) << " |\n";
    }
  if (!abl.str().empty())
    md << "\n# Ablation (drop in holistic QWK)\n\n| Prompt | Base | Removed trait | Drop |\n|---|---|---|---|\n"
       << abl.str();

  if (!report.warnings().empty()) {
    md << "\n# Warnings\n\n";
    for (const auto& w : report.warnings()) md << "- " << w << '\n';
  }
  return md.str();
}

void write_traits_csv(std::ostream& out, const EvalReport& report) {
  out << "trait,system,mean_qwk,prompts\n";
  const std::string overall(kOverall);
  std::map<std::pair<std::string, std::string>, std::vector<double>> rows;
  for (const auto& config : report.configs()) {
    if (config.find("-minus-") != std::string::npos) continue;
    std::set<std::string> heads;
    for (const auto& c : report.cells())
      if (c.config == config && c.head != overall) heads.insert(c.head);
    for (const auto& h : heads)
      for (int p : report.prompts())
        if (auto m = report.fold_mean(p, config, h)) rows[{h, trait_system(config)}].push_back(*m);
  }
  for (const auto& [key, values] : rows)
    out << key.first << ',' << key.second << ',' << std::setprecision(6) << mean(values) << ',' << values.size()
        << '\n';
}

std::string render_traits_svg(const EvalReport& report) {
  std::ostringstream csv;
  write_traits_csv(csv, report);
  std::istringstream in(csv.str());
  std::string line;
  std::getline(in, line);
  std::map<std::string, std::map<std::string, double>> data;
  std::set<std::string> systems;
  while (std::getline(in, line)) {
    const auto f = split(line, ',');
    data[f[0]][f[1]] = std::stod(f[2]);
    systems.insert(f[1]);
  }
  static const std::array<const char*, 6> colours{"#4e79a7", "#f28e2b", "#59a14f", "#e15759", "#76b7b2", "#b07aa1"};
  const int bar = 14, gap = 20, height = 240, top = 20, left = 40;
  const int group = static_cast<int>(systems.size()) * bar + gap;
  const int width = left + std::max(1, static_cast<int>(data.size())) * group + 160;
  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height + 80 << "\">\n";
  svg << "<line x1=\"" << left << "\" y1=\"" << top + height << "\" x2=\"" << width - 150 << "\" y2=\"" << top + height
      << "\" stroke=\"black\"/>\n";
  for (int tick = 0; tick <= 10; tick += 2) {
    const int y = top + height - height * tick / 10;
    svg << "<text x=\"4\" y=\"" << y + 4 << "\" font-size=\"10\">" << fmt(tick / 10.0, 1) << "</text>\n";
  }
  int gx = left;
  for (const auto& [trait, by_system] : data) {
    int i = 0;
    for (const auto& s : systems) {
      auto it = by_system.find(s);
      if (it != by_system.end()) {
        const int h = static_cast<int>(std::clamp(it->second, 0.0, 1.0) * height);
        svg << "<rect x=\"" << gx + i * bar << "\" y=\"" << top + height - h << "\" width=\"" << bar - 2
            << "\" height=\"" << h << "\" fill=\"" << colours[static_cast<std::size_t>(i) % colours.size()] << "\"/>\n";
      }
      ++i;
    }
    svg << "<text x=\"" << gx << "\" y=\"" << top + height + 14 << "\" font-size=\"10\" transform=\"rotate(30 " << gx
        << ' ' << top + height + 14 << ")\">" << trait << "</text>\n";
    gx += group;
  }
  int i = 0;
  for (const auto& s : systems) {
    const int y = top + 14 * i;
    svg << "<rect x=\"" << width - 140 << "\" y=\"" << y << "\" width=\"10\" height=\"10\" fill=\""
        << colours[static_cast<std::size_t>(i) % colours.size()] << "\"/><text x=\"" << width - 125 << "\" y=\""
        << y + 9 << "\" font-size=\"10\">" << s << "</text>\n";
    ++i;
  }
  svg << "</svg>\n";
  return svg.str();
}

void write_report_files(const fs::path& dir, const EvalReport& report) {
  fs::create_directories(dir);
  {
    std::ofstream out(dir / "report.csv");
    write_report_csv(out, report);
  }
  {
    std::ofstream out(dir / "report.md");
    out << render_markdown(report);
  }
  {
    std::ofstream out(dir / "traits.csv");
    write_traits_csv(out, report);
  }
  std::ofstream out(dir / "traits.svg");
  out << render_traits_svg(report);
}

}  // namespace traitgrade
