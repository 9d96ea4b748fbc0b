/** Client-side validation for rating submissions, mirroring the server rules. */

import type { Rating } from './api.js';

export const VALID_LABELS = ['helpful', 'unhelpful'] as const;

export const CRITERIA_KEYS = [
  'relevance',
  'novelty',
  'scientific_sense',
  'clarity',
] as const;

export interface ValidationResult {
  ok: boolean;
  errors: string[];
}

export function validateRating(input: {
  label: string;
  criteria: Record<string, unknown>;
}): ValidationResult {
  const errors: string[] = [];
  if (!(VALID_LABELS as readonly string[]).includes(input.label)) {
    errors.push(`label must be one of: ${VALID_LABELS.join(', ')}`);
  }
  for (const key of CRITERIA_KEYS) {
    const value = input.criteria[key];
    if (value === undefined) {
      errors.push(`missing criterion: ${key}`);
    } else if (typeof value !== 'number' || Number.isNaN(value)) {
      errors.push(`criterion ${key} must be a number`);
    }
  }
  for (const key of Object.keys(input.criteria)) {
    if (!(CRITERIA_KEYS as readonly string[]).includes(key)) {
      errors.push(`unknown criterion: ${key}`);
    }
  }
  return { ok: errors.length === 0, errors };
}

/** Narrow a validated input into a Rating; throws on invalid data. */
export function asRating(input: {
  label: string;
  criteria: Record<string, unknown>;
}): Rating {
  const result = validateRating(input);
  if (!result.ok) {
    throw new Error(result.errors.join('; '));
  }
  return {
    label: input.label as Rating['label'],
    criteria: input.criteria as Record<string, number>,
  };
}
