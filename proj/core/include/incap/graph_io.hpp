#ifndef INCAP_GRAPH_IO_HPP
#define INCAP_GRAPH_IO_HPP

#include <string>

#include "incap/site_graph.hpp"

namespace incap {

// Graph-spec JSON:
//   { "sites": ["x", ...],
//     "rates": [["x", "y", 1.0], ...],
//     "measure": [["x", 1.0], ...] }   // optional; validated when present
SiteGraph load_site_graph_json(const std::string& text);
SiteGraph load_site_graph_file(const std::string& path);

}  // namespace incap

#endif
