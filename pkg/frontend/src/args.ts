/** Minimal --flag value argument parsing shared by the three scripts. */

export function parseArgs(argv: string[], required: string[], optional: string[] = []):
    Record<string, string> {
  const out: Record<string, string> = {};
  for (let i = 0; i < argv.length; i += 2) {
    const key = argv[i];
    const value = argv[i + 1];
    if (!key.startsWith("--") || value === undefined) {
      throw new Error(`expected --flag value pairs, got '${key}'`);
    }
    out[key.slice(2)] = value;
  }
  for (const name of required) {
    if (!(name in out)) {
      throw new Error(`missing required --${name}`);
    }
  }
  const known = new Set([...required, ...optional]);
  for (const name of Object.keys(out)) {
    if (!known.has(name)) {
      throw new Error(`unknown flag --${name}`);
    }
  }
  return out;
}
