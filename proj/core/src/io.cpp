#include "geomatch/io.hpp"

#include <charconv>
#include <istream>
#include <ostream>
#include <sstream>

namespace geomatch {

std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

namespace {
bool parse_point(const std::string& line, int d, PtD& p) {
    std::istringstream ss(line);
    for (int i = 0; i < d; ++i)
        if (!(ss >> p[i])) return false;
    std::string rest;
    if (ss >> rest) return false;  // trailing tokens
    return true;
}
}  // namespace

bool read_instance(std::istream& in, RawInstance& inst, ParseError& err) {
    std::string line;
    int lineno = 0;
    if (!std::getline(in, line)) {
        err = {1, "missing header line 'd n'"};
        return false;
    }
    ++lineno;
    int n = 0;
    {
        std::istringstream ss(line);
        if (!(ss >> inst.d >> n) || inst.d < 1 || n < 0) {
            err = {lineno, "expected header 'd n' with d >= 1, n >= 0"};
            return false;
        }
        std::string rest;
        if (ss >> rest) {
            err = {lineno, "trailing tokens after 'd n'"};
            return false;
        }
    }
    if (inst.d > kMaxDim) {
        err = {lineno, "dimension larger than supported maximum (8)"};
        return false;
    }
    inst.a.assign(size_t(n), PtD{});
    inst.b.assign(size_t(n), PtD{});
    for (int side = 0; side < 2; ++side) {
        auto& pts = side == 0 ? inst.a : inst.b;
        for (int i = 0; i < n; ++i) {
            if (!std::getline(in, line)) {
                err = {lineno + 1, "unexpected end of file: expected coordinate line"};
                return false;
            }
            ++lineno;
            if (!parse_point(line, inst.d, pts[size_t(i)])) {
                err = {lineno, "expected " + std::to_string(inst.d) + " decimals"};
                return false;
            }
        }
    }
    std::string vmsg = inst.validate();
    if (!vmsg.empty()) {
        err = {lineno, vmsg};
        return false;
    }
    return true;
}

void write_instance(std::ostream& out, const RawInstance& inst) {
    out << inst.d << " " << inst.n() << "\n";
    for (const auto* pts : {&inst.a, &inst.b})
        for (const auto& p : *pts) {
            for (int i = 0; i < inst.d; ++i) out << (i ? " " : "") << format_double(p[i]);
            out << "\n";
        }
}

bool read_matching(std::istream& in, MatchingFile& mf, ParseError& err) {
    std::string line;
    int lineno = 0;
    if (!std::getline(in, line)) {
        err = {1, "missing 'cost <decimal>' line"};
        return false;
    }
    ++lineno;
    {
        std::istringstream ss(line);
        std::string tag;
        if (!(ss >> tag >> mf.cost) || tag != "cost") {
            err = {lineno, "expected 'cost <decimal>'"};
            return false;
        }
    }
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream ss(line);
        int ai = 0, bi = 0;
        if (!(ss >> ai >> bi)) {
            err = {lineno, "expected 'a_index b_index'"};
            return false;
        }
        mf.pairs.push_back({ai, bi});
    }
    return true;
}

void write_matching(std::ostream& out, double cost, const std::vector<int>& match_a) {
    out << "cost " << format_double(cost) << "\n";
    for (size_t i = 0; i < match_a.size(); ++i)
        out << i << " " << match_a[i] << "\n";
}

}  // namespace geomatch
