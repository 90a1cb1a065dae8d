#include "incap/graph_io.hpp"

#include <fstream>
#include <json.hpp>
#include <sstream>

#include "incap/errors.hpp"

namespace incap {

SiteGraph load_site_graph_json(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("graph JSON: ") + e.what());
  }
  try {
    std::vector<std::string> sites = doc.at("sites").get<std::vector<std::string>>();
    std::vector<RateTriple> rates;
    for (const auto& entry : doc.at("rates")) {
      if (!entry.is_array() || entry.size() != 3)
        throw ParseError("each rate entry must be [from, to, rate]");
      rates.emplace_back(entry[0].get<std::string>(), entry[1].get<std::string>(),
                         entry[2].get<double>());
    }
    std::optional<std::vector<std::pair<std::string, double>>> measure;
    if (doc.contains("measure")) {
      std::vector<std::pair<std::string, double>> m;
      for (const auto& entry : doc.at("measure")) {
        if (!entry.is_array() || entry.size() != 2)
          throw ParseError("each measure entry must be [site, value]");
        m.emplace_back(entry[0].get<std::string>(), entry[1].get<double>());
      }
      measure = std::move(m);
    }
    return build_site_graph(sites, rates, measure);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("graph JSON: ") + e.what());
  }
}

SiteGraph load_site_graph_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open graph file: " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return load_site_graph_json(buffer.str());
}

}  // namespace incap
