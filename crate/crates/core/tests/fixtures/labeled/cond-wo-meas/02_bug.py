from qiskit import ClassicalRegister, QuantumCircuit, QuantumRegister, transpile

q = QuantumRegister(2, "q")
c = ClassicalRegister(2, "c")
qc = QuantumCircuit(q, c)
qc.h(q[0])
qc.x(q[1]).c_if(c, 1)  # expect: cond-wo-meas
qc.measure(q[0], c[0])
qc.measure(q[1], c[1])
