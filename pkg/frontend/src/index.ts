export { parseCsv, loadCsv, column, prefixedColumns, MissingColumnError } from "./csv.js";
export type { CsvTable } from "./csv.js";
export {
  render,
  renderTracking,
  renderErrorIntegrals,
  renderBoundarySurface,
} from "./figures.js";
export type { FigureKind, FigureSpec } from "./figures.js";
export { main, parseArgs, UsageError } from "./cli.js";
