export { EmptyInputError, SchemaMismatchError, parseCsv, numericCell } from "./csv.js";
export type { Row } from "./csv.js";
export { aggregateByX } from "./stats.js";
export type { SeriesPoint } from "./stats.js";
export { PANELS, PANEL_NAMES, ROLE_COLORS } from "./panels.js";
export type { ColorRole, PanelSpec, SeriesSpec } from "./panels.js";
export { renderPanel } from "./svg.js";
export { run, EXIT_SCHEMA, EXIT_EMPTY, EXIT_IO } from "./cli.js";
