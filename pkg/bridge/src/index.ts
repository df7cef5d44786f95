export {
  BridgeOptions,
  ConnectionError,
  EnvSpec,
  ProtocolError,
  SkyfleetEnv,
  StepResult,
} from "./bridge.js";
