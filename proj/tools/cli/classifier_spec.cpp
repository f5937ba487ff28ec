#include "classifier_spec.hpp"

#include <charconv>
#include <sstream>

#include "rmpd/errors.hpp"
#include "rmpd/external.hpp"
#include "rmpd/interchange.hpp"
#include "rmpd/synthetic.hpp"

namespace rmpd::cli {

std::vector<std::string> split_words(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream in(s);
    for (std::string w; in >> w;) out.push_back(w);
    return out;
}

std::vector<double> parse_number_list(const std::string& s) {
    std::vector<double> out;
    std::size_t pos = 0;
    while (pos <= s.size()) {
        const auto comma = s.find(',', pos);
        const auto end = comma == std::string::npos ? s.size() : comma;
        const std::string item = s.substr(pos, end - pos);
        double v = 0.0;
        const auto res = std::from_chars(item.data(), item.data() + item.size(), v);
        if (item.empty() || res.ec != std::errc() || res.ptr != item.data() + item.size()) {
            throw InvalidArgument("not a number list: '" + s + "'");
        }
        out.push_back(v);
        if (comma == std::string::npos) break;
        pos = comma + 1;
    }
    return out;
}

ClassifierHandle open_classifier(const std::string& spec, const OracleParams& params,
                                 std::size_t external_classes, std::chrono::milliseconds timeout) {
    const auto colon = spec.find(':');
    if (colon == std::string::npos) {
        throw InvalidArgument("classifier spec must be oracle:<kind>, external:<cmd> or interchange:<path>");
    }
    const std::string scheme = spec.substr(0, colon), rest = spec.substr(colon + 1);
    if (scheme == "oracle") {
        if (rest == "constant") return make_constant_oracle(params.probs);
        if (rest == "area-fraction" || rest == "area_fraction") {
            return make_area_fraction_oracle({params.target_color, params.tolerance, params.reference_fraction});
        }
        if (rest == "two-blob" || rest == "two_blob") {
            const auto scene = synthetic::two_blob_scene();
            return make_two_blob_oracle(scene.target_a, scene.target_b);
        }
        throw InvalidArgument("unknown oracle kind '" + rest + "'");
    }
    if (scheme == "external") {
        auto argv = split_words(rest);
        if (argv.empty()) throw InvalidArgument("external classifier needs a command");
        return open_external(argv, external_classes, ExternalOptions{timeout});
    }
    if (scheme == "interchange") {
        if (rest.empty()) throw InvalidArgument("interchange classifier needs a model path");
        return open_interchange(rest);
    }
    throw InvalidArgument("unknown classifier scheme '" + scheme + "'");
}

}  // namespace rmpd::cli
