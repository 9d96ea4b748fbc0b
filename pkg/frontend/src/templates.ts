/** Prompt preview rendering.
 *
 * The strings here must stay byte-identical to the backend's templates; a
 * golden test compares them against the reference file the backend exports.
 */

export const FORWARD_SEED = '{v} is used for {p}';
export const BACKWARD_SEED = '{v} is done by using {p}';
export const PLAIN_INPUT = '{P} | context: {B}';
export const ENRICHED_INPUT = '{P} | retrieve: {neighbors} | context: {B}';
export const NEIGHBOR_JOIN = ', ';

/** Prompt surface forms for the entity types. */
export const TYPE_SURFACE: Record<string, string> = {
  Task: 'Task',
  Method: 'Method',
  'Evaluation Metric': 'Metric',
  Material: 'Material',
  'Other Scientific Terms': 'OtherScientificTerm',
  'Generic Terms': 'Generic',
};

export function seedPrompt(
  seed: string,
  targetType: string,
  direction: 'forward' | 'backward',
): string {
  const template = direction === 'forward' ? FORWARD_SEED : BACKWARD_SEED;
  const surface = TYPE_SURFACE[targetType] ?? targetType;
  return template.replace('{v}', seed).replace('{p}', surface);
}

export function modelInputPreview(
  prompt: string,
  neighbors: string[],
  background: string,
): string {
  if (neighbors.length === 0) {
    return PLAIN_INPUT.replace('{P}', prompt).replace('{B}', background);
  }
  return ENRICHED_INPUT.replace('{P}', prompt)
    .replace('{neighbors}', neighbors.join(NEIGHBOR_JOIN))
    .replace('{B}', background);
}
