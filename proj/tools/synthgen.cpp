// Regenerates the bundled synthetic dataset (data/synthetic/). The output is
// a pure function of --seed and --dialogues, so the committed files can be
// verified byte-for-byte.

#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "sara/errors.hpp"
#include "sara/synth.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Synthetic corpus generator"};
  std::string out_dir = "data/synthetic";
  std::uint64_t seed = 20240901;
  std::size_t dialogues = 100;
  std::size_t intents = 120;
  app.add_option("--out", out_dir, "output directory")->capture_default_str();
  app.add_option("--seed", seed, "generator seed")->capture_default_str();
  app.add_option("--dialogues", dialogues, "number of dialogues")
      ->capture_default_str();
  app.add_option("--intents", intents, "number of intent examples")
      ->capture_default_str();

  try {
    app.parse(argc, argv);
    const sara::SynthData data = sara::make_synth_data(seed, dialogues, intents);
    sara::write_synth_data(data, out_dir);
    std::cout << "wrote " << data.corpus.size() << " dialogues, "
              << data.intents.size() << " intent examples, "
              << data.vocab_tokens.size() << " vocab tokens to " << out_dir
              << '\n';
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  } catch (const sara::DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
