#include "fdx/align/grid.hpp"

#include <algorithm>
#include <sstream>
#include <vector>

namespace fdx::align {

namespace {

struct Cell {
    std::string text;
    int width = 0; // display columns
};

Cell number(int v) {
    auto s = std::to_string(v);
    const int w = static_cast<int>(s.size());
    return {std::move(s), w};
}

Cell symbol(const char* utf8) { return {utf8, 1}; }

} // namespace

std::string render_grid(const Timeline& t) {
    const auto& v = t.vocab;
    const bool has_visual = !t.empty() && t[0].visual.has_value();

    std::vector<std::pair<std::string, std::vector<Cell>>> rows;
    rows.push_back({"frame", {}});
    rows.push_back({"listen", {}});
    rows.push_back({"speak", {}});
    rows.push_back({"text", {}});
    rows.push_back({"action", {}});
    if (has_visual) rows.push_back({"visual", {}});

    auto audio = [&](int id) { return id == v.sil ? symbol("_") : number(id); };
    for (int f = 0; f < t.size(); ++f) {
        const auto& fr = t[f];
        rows[0].second.push_back(number(f));
        rows[1].second.push_back(audio(fr.listen));
        rows[2].second.push_back(audio(fr.speak));
        if (fr.text == v.text.wait)
            rows[3].second.push_back(symbol("\xC2\xB7"));
        else if (fr.text == v.text.pad)
            rows[3].second.push_back(symbol("~"));
        else if (fr.text == v.text.epad)
            rows[3].second.push_back(symbol("^"));
        else
            rows[3].second.push_back(number(fr.text));
        rows[4].second.push_back(fr.action == v.noop ? symbol(".") : number(fr.action));
        if (has_visual) rows[5].second.push_back(fr.visual ? number(*fr.visual) : symbol(" "));
    }

    int width = 2;
    for (const auto& r : rows)
        for (const auto& c : r.second) width = std::max(width, c.width);
    width += 1;

    std::ostringstream os;
    for (const auto& [label, cells] : rows) {
        std::string l = label;
        l.resize(7, ' ');
        os << l;
        for (const auto& c : cells) os << std::string(static_cast<std::size_t>(width - c.width), ' ') << c.text;
        os << '\n';
    }
    return os.str();
}

} // namespace fdx::align
