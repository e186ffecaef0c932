export * from './api.js';
export * from './wizard.js';
export * from './dashboard.js';
export * from './approvals.js';
export * from './audit.js';
