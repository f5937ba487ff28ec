#pragma once

#include <chrono>
#include <string>
#include <vector>

#include "rmpd/classifier.hpp"

namespace rmpd::cli {

/// Parameters the synthetic oracles read from flags.
struct OracleParams {
    Rgb target_color{255.0, 0.0, 0.0};
    double tolerance = 30.0;
    double reference_fraction = 0.25;
    std::vector<double> probs{0.5, 0.5};  // constant oracle
};

/// Opens a classifier from its textual spec:
///   oracle:constant | oracle:area-fraction | oracle:two-blob
///   external:<command line>   (whitespace separated argv)
///   interchange:<model path>
/// `external_classes` = 0 accepts whatever the server announces.
/// Throws InvalidArgument for malformed specs.
ClassifierHandle open_classifier(const std::string& spec, const OracleParams& params,
                                 std::size_t external_classes = 0,
                                 std::chrono::milliseconds timeout = std::chrono::milliseconds(30000));

/// Splits on runs of spaces and tabs.
std::vector<std::string> split_words(const std::string& s);

/// Parses "a,b,c" into doubles; throws InvalidArgument on junk.
std::vector<double> parse_number_list(const std::string& s);

}  // namespace rmpd::cli
