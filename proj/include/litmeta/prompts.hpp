#pragma once

#include <string>

#include "litmeta/common.hpp"

namespace litmeta::llm {

// The prompt catalog. These strings are the pipeline's interface to the
// language model and must stay byte-stable: responses are cached and
// regression fixtures assume exact request text.

inline const std::string& relevance_prompt() {
    static const std::string text =
        "Does this study apply the WRF model for precipitation simulation (Here, Precipitation "
        "includes rainfall and snowfall)? Additionally, if the study is about precipitation "
        "simulation and does not explicitly mention the model used in the abstract, consider it "
        "as an application of the WRF model. Please analyze the text and provide answers to the "
        "above questions. Please just answer Yes or No.";
    return text;
}

inline const std::string& extraction_question(int number) {
    static const std::string questions[8] = {
        "1. What was the configuration/setup of physical parameterizations for each WRF "
        "application? (The set of physical parameterization options including cloud microphysics, "
        "radiation, cumulus, boundary layer schemes)? And what was the land surface model used? "
        "(Please list the names directly)",
        "2. What is the simulation domain or study area for each WRF application? Please answer "
        "this question directly without additional context or explanations.",
        "3. For each WRF application, which precipitation-related variable was evaluated: "
        "accumulated precipitation/rainfall amount, instantaneous precipitation/rainfall rate, or "
        "reflectivity? If it was accumulated precipitation amount, specify the accumulation "
        "period. Please answer this question directly without additional context or explanations.",
        "4. For each WRF application, was the simulated precipitation overestimated or "
        "underestimated compared to observed data? Please describe the corresponding WRF "
        "configuration. The 'overestimated' can be replaced by wet bias, positive bias, more, "
        "more intense, heavier, larger, higher, wetter, stronger, exceeds, produce an excess of "
        "rainfall, or produce too much precipitation, etc. The 'underestimated' can be replaced "
        "by dry bias, negative bias, less, less intense, weaker, smaller, lower, drier, generate "
        "too little precipitation, fail to simulate or cannot simulate precipitation, etc. "
        "Provide a summary.",
        "5. Where the precipitation was overestimated compared with observed data? Note please "
        "list regions. (The 'overestimated' can be replaced by wet bias, positive bias, more, "
        "more intense, heavier, larger, higher, wetter, stronger, exceeds, produce an excess of "
        "rainfall, or produce too much precipitation, etc. The 'precipitation' can be replaced by "
        "rainfall, rain amount, or P, etc.). Provide a summary.",
        "6. Where the precipitation was underestimated compared with observed data? Note please "
        "list regions. (The 'underestimated' can be replaced by dry bias, negative bias, less, "
        "less intense, weaker, smaller, lower, drier, generate too little precipitation, fail to "
        "simulate or cannot simulate precipitation, etc. The 'precipitation' can be replaced by "
        "rainfall, rain amount, or P, etc.). Provide a summary.",
        "7. Are there any RMSE (Root Mean Squared Error) values for each WRF application? If so, "
        "list the values and units one by one. Please review all text and tables thoroughly. Note "
        "'yes' or 'no' first, then provide all values from all text and tables. If there are "
        "different WRF configurations, list the error values along with their corresponding "
        "microphysics scheme. Please ensure that your answers are accurate and complete.",
        "8. Are there any correlation coefficients (CC) for each WRF application? If so, list the "
        "values one by one. Please review all the text and tables.",
    };
    if (number < 1 || number > 8) throw Error("BadQuestion", "question number out of range");
    return questions[number - 1];
}

inline const std::string& extraction_preamble() {
    static const std::string text =
        "Please answer the following questions based on the study provided. Note: Each question "
        "should be considered independently, and the documentation should be reviewed thoroughly "
        "as if each question was asked one by one.";
    return text;
}

// The eight-question prompt, questions numbered 1-8.
inline const std::string& extraction_prompt() {
    static const std::string text = [] {
        std::string s = extraction_preamble();
        for (int q = 1; q <= 8; ++q) {
            s += "\n\n";
            s += extraction_question(q);
        }
        return s;
    }();
    return text;
}

// Follow-up query resolving a named simulation domain to a bounding box.
inline std::string geocode_prompt(const std::string& domain_name) {
    if (trim(domain_name).empty()) throw Error("EmptyDomainName", "domain name is empty");
    return "What are the northern and southern latitudes, and western and eastern longitudes of "
           "the following simulation domain: " +
           domain_name +
           "? Reply with four signed decimal degrees labeled north, south, west, and east.";
}

}  // namespace litmeta::llm
