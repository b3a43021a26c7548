#pragma once

#include <compare>
#include <string>
#include <string_view>

namespace fieldpipe {

/// Calendar date parsed from and printed as ISO-8601 "YYYY-MM-DD".
struct Date {
    int year = 1970;
    int month = 1;
    int day = 1;

    friend auto operator<=>(const Date&, const Date&) = default;

    /// Throws Error(Contract) on malformed text or an impossible day.
    static Date parse(std::string_view text);
    std::string to_string() const;
};

}  // namespace fieldpipe
