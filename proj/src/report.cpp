#include "curator/report.hpp"

#include <algorithm>
#include <cstdio>
#include <vector>

namespace curator::report {

std::string render_text(const Manifest& manifest) {
    std::string out = "run " + manifest.run_id + " (created " + manifest.created_at + ")\n";
    out += "stage                            in         out        rejected   top rules\n";
    char line[512];
    for (const auto& [name, stats] : manifest.stages) {
        // Generative stages (packing, synthesis) can emit more than they read.
        const auto rejected =
            stats.input_count > stats.output_count ? stats.input_count - stats.output_count : 0;
        std::vector<std::pair<std::string, std::uint64_t>> rules(stats.reject_histogram.begin(),
                                                                 stats.reject_histogram.end());
        std::sort(rules.begin(), rules.end(), [](const auto& a, const auto& b) {
            if (a.second != b.second) return a.second > b.second;
            return a.first < b.first;
        });
        std::string top;
        for (std::size_t i = 0; i < rules.size() && i < 3; ++i) {
            if (i > 0) top += ", ";
            top += rules[i].first + "(" + std::to_string(rules[i].second) + ")";
        }
        std::snprintf(line, sizeof(line), "%-32s %-10llu %-10llu %-10llu %s\n", name.c_str(),
                      static_cast<unsigned long long>(stats.input_count),
                      static_cast<unsigned long long>(stats.output_count),
                      static_cast<unsigned long long>(rejected), top.c_str());
        out += line;
    }
    return out;
}

nlohmann::json render_structured(const Manifest& manifest) { return to_json(manifest); }

}  // namespace curator::report
