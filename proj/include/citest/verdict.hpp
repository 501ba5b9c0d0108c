#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace citest {

enum class Outcome { Yes, No, Abort };

inline const char* to_string(Outcome o) {
    switch (o) {
        case Outcome::Yes: return "yes";
        case Outcome::No: return "no";
        case Outcome::Abort: return "abort";
    }
    return "?";
}

struct CategoryDiag {
    int i = 0, j = 0, k = 0;
    std::string kind;  // heavy, mixed, light, small-norm
    std::size_t size = 0;
    double b = 0.0;
    double gamma = 0.0;
    std::size_t samples = 0;
    int repetitions = 0;
    int far_votes = 0;
    double statistic = 0.0;
    double threshold = 0.0;
    bool far = false;
    std::string note;
};

struct Verdict {
    Outcome outcome = Outcome::Yes;
    std::vector<CategoryDiag> categories;
    std::size_t samples_used = 0;
    double statistic = 0.0;
    double threshold = 0.0;
    std::string note;
};

}  // namespace citest
