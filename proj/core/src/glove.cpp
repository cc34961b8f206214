#include "traitgrade/glove.hpp"

#include <fstream>
#include <sstream>

#include "traitgrade/errors.hpp"
#include "traitgrade/text.hpp"

namespace traitgrade {

GloveTable read_glove(const std::filesystem::path& path, std::size_t expected_dim, const Vocabulary* keep) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open GloVe file " + path.string());
  GloveTable table;
  table.dim = expected_dim;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string token;
    fields >> token;
    std::vector<Real> values;
    double x;
    while (fields >> x) values.push_back(static_cast<Real>(x));
    if (!fields.eof())
      throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": unreadable vector value");
    if (table.dim == 0) table.dim = values.size();
    if (values.size() != table.dim)
      throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": vector has " +
                        std::to_string(values.size()) + " dimensions, expected " + std::to_string(table.dim));
    if (keep && keep->lookup(token) == Vocabulary::kUnk) continue;
    table.vectors.emplace(std::move(token), std::move(values));
  }
  return table;
}

}  // namespace traitgrade
