#include "jolt/mask.hpp"

#include <algorithm>
#include <sstream>

#include "jolt/error.hpp"

namespace jolt {

std::size_t AttentionMask::row_count(std::size_t i) const noexcept {
    const auto* r = row(i);
    return static_cast<std::size_t>(std::count(r, r + n_, 1));
}

AttentionMask build_joint_mask(const SegmentMap& seg) {
    const std::size_t n = seg.size();
    if (n == 0) throw Error(ErrorCode::InvalidSegmentation, "empty sequence");
    if (seg.marker.size() != n || seg.gt_schema.size() != n || seg.noisy_schema.size() != n) {
        throw Error(ErrorCode::InvalidSegmentation, "per-token flag vectors do not cover the sequence");
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (seg.segment[i] != Segment::Schema && (seg.marker[i] || seg.gt_schema[i] || seg.noisy_schema[i])) {
            throw Error(ErrorCode::InvalidSegmentation, "schema-only flag set outside the schema at position " + std::to_string(i));
        }
    }

    AttentionMask mask(n);
    for (std::size_t i = 0; i < n; ++i) {
        const Segment si = seg.segment[i];
        for (std::size_t j = 0; j < n; ++j) {
            const Segment sj = seg.segment[j];
            const bool j_marker = seg.marker[j] != 0;
            bool v = false;
            switch (si) {
                case Segment::Prefix:
                    v = sj == Segment::Prefix && j <= i;
                    break;
                case Segment::Schema:
                    v = sj != Segment::Query && (seg.marker[i] || !j_marker);
                    break;
                case Segment::Query:
                    v = !j_marker && (sj == Segment::Prefix || (sj == Segment::Query && j <= i) ||
                                      (sj == Segment::Schema && (seg.gt_schema[j] || seg.noisy_schema[j])));
                    break;
            }
            if (v) mask.set(i, j);
        }
    }
    return mask;
}

AttentionMask build_causal_mask(std::size_t n) {
    if (n == 0) throw Error(ErrorCode::InvalidSegmentation, "causal mask needs n >= 1");
    AttentionMask mask(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j <= i; ++j) mask.set(i, j);
    }
    return mask;
}

namespace {

char tag(const SegmentMap& seg, std::size_t i) {
    switch (seg.segment[i]) {
        case Segment::Prefix: return 'P';
        case Segment::Query: return 'Q';
        case Segment::Schema:
            if (seg.marker[i]) return 'M';
            if (seg.gt_schema[i]) return 'G';
            if (seg.noisy_schema[i]) return 'N';
            return 'S';
    }
    return '?';
}

std::string xml_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '&': out += "&amp;"; break;
            case '"': out += "&quot;"; break;
            case '\'': out += "&apos;"; break;
            default: out += c;
        }
    }
    return out;
}

}  // namespace

std::string render_mask_ascii(const AttentionMask& mask, const SegmentMap* seg, const std::vector<std::string>* labels) {
    const std::size_t n = mask.size();
    std::size_t label_width = 0;
    if (labels) {
        for (const auto& l : *labels) label_width = std::max(label_width, l.size());
    }
    std::ostringstream os;
    const std::string pad(label_width + (seg ? 2 : 0), ' ');
    if (seg) {
        os << pad;
        for (std::size_t j = 0; j < n; ++j) os << tag(*seg, j);
        os << '\n';
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (labels) {
            const std::string& l = i < labels->size() ? (*labels)[i] : std::string();
            os << l << std::string(label_width - l.size(), ' ');
        }
        if (seg) os << ' ' << tag(*seg, i);
        if (labels || seg) os << ' ';
        for (std::size_t j = 0; j < n; ++j) os << (mask(i, j) ? '#' : '.');
        os << '\n';
    }
    return os.str();
}

std::string render_mask_ppm(const AttentionMask& mask, std::size_t cell) {
    const std::size_t side = mask.size() * cell;
    std::ostringstream os;
    os << "P3\n" << side << ' ' << side << "\n255\n";
    for (std::size_t y = 0; y < side; ++y) {
        for (std::size_t x = 0; x < side; ++x) {
            const bool v = mask(y / cell, x / cell);
            os << (v ? "0 0 0" : "255 255 255") << (x + 1 == side ? '\n' : ' ');
        }
    }
    return os.str();
}

std::string render_mask_svg(const AttentionMask& mask, const std::vector<std::string>* labels, std::size_t cell) {
    const std::size_t n = mask.size();
    const std::size_t margin = labels ? 90 : 4;
    const std::size_t side = margin + n * cell + 4;
    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << side << "\" height=\"" << side << "\" font-family=\"monospace\" font-size=\""
       << cell - 4 << "\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            os << "<rect x=\"" << margin + j * cell << "\" y=\"" << margin + i * cell << "\" width=\"" << cell << "\" height=\"" << cell
               << "\" fill=\"" << (mask(i, j) ? "black" : "white") << "\" stroke=\"#999\" stroke-width=\"0.5\"/>\n";
        }
    }
    if (labels) {
        for (std::size_t i = 0; i < n && i < labels->size(); ++i) {
            const std::string l = xml_escape((*labels)[i]);
            os << "<text x=\"" << margin - 4 << "\" y=\"" << margin + i * cell + cell - 3 << "\" text-anchor=\"end\">" << l << "</text>\n";
            os << "<text transform=\"translate(" << margin + i * cell + cell - 3 << "," << margin - 4 << ") rotate(-90)\">" << l
               << "</text>\n";
        }
    }
    os << "</svg>\n";
    return os.str();
}

}  // namespace jolt
