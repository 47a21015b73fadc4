#ifndef STATEFUZZ_ERROR_HPP
#define STATEFUZZ_ERROR_HPP

#include <stdexcept>
#include <string>

namespace statefuzz {

/// Base of every error the library raises. `kind()` is the stable name
/// used in reports and profile exception lists.
class Error : public std::runtime_error
{
public:
    Error(std::string kind, const std::string& what)
        : std::runtime_error(kind + ": " + what), kind_(std::move(kind)) { }

    const std::string& kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

#define STATEFUZZ_DEFINE_ERROR(Name)                                      \
    class Name : public Error                                             \
    {                                                                     \
    public:                                                               \
        explicit Name(const std::string& what) : Error(#Name, what) { }   \
    };

// fuzzspec
STATEFUZZ_DEFINE_ERROR(SyntaxError)
STATEFUZZ_DEFINE_ERROR(VocabularyError)
STATEFUZZ_DEFINE_ERROR(ConstraintError)
STATEFUZZ_DEFINE_ERROR(BandError)
STATEFUZZ_DEFINE_ERROR(GeometryError)
STATEFUZZ_DEFINE_ERROR(SequenceError)
// sutmodel / executor
STATEFUZZ_DEFINE_ERROR(IllegalEvent)
STATEFUZZ_DEFINE_ERROR(UnknownFault)
STATEFUZZ_DEFINE_ERROR(ConfigError)
STATEFUZZ_DEFINE_ERROR(SimTimeout)
// testgen
STATEFUZZ_DEFINE_ERROR(EmptyProduct)
STATEFUZZ_DEFINE_ERROR(UnknownAxis)
// oracle
STATEFUZZ_DEFINE_ERROR(MissingDatum)
STATEFUZZ_DEFINE_ERROR(UnknownPredicate)
STATEFUZZ_DEFINE_ERROR(MalformedTree)
// analysis
STATEFUZZ_DEFINE_ERROR(EmptyFailureSet)
STATEFUZZ_DEFINE_ERROR(DegenerateK)
// cutset
STATEFUZZ_DEFINE_ERROR(InvalidOnly)
// campaign
STATEFUZZ_DEFINE_ERROR(UnknownTestId)
STATEFUZZ_DEFINE_ERROR(StorageError)

#undef STATEFUZZ_DEFINE_ERROR

} // namespace statefuzz

#endif // STATEFUZZ_ERROR_HPP
