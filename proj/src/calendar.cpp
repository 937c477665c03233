#include "netfuse/calendar.hpp"

#include <cstdio>

namespace netfuse {

Date Date::parse(const std::string& text)
{
    Date d;
    char tail = 0;
    const int got = std::sscanf(text.c_str(), "%d-%d-%d%c", &d.year, &d.month, &d.day, &tail);
    if (got != 3 || !d.valid())
        throw SchemaError("invalid date '" + text + "', expected YYYY-MM-DD");
    return d;
}

std::string Date::to_string() const
{
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", year, month, day);
    return buf;
}

}  // namespace netfuse
